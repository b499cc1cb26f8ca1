use proptest::prelude::*;

use slaforge_core::metrics::{compute_losses, EquityKind, MetricsConfig};
use slaforge_core::model::normalize_weights;
use slaforge_core::search::{
    dominates, evaluate_policy_batch, hypervolume, out_of_sample, pareto_filter, FrontEntry, ParetoFront,
};
use slaforge_core::sim::{simulate_borough_policy, Fate, SimulationConfig};
use slaforge_core::stylized::{
    kkt_residual, solve_extreme_efficiency, solve_extreme_equity, solve_weighted, verify_solution,
    WeightedObjectiveConfig,
};
use slaforge_core::{ArrivalTrace, BoroughPolicy, CapacityTrace, Grid, Instance, Instance32, Policy};

fn instance_strategy() -> impl Strategy<Value = Instance> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(nk, nb)| {
            (
                prop::collection::vec(prop::collection::vec(0.1f64..5.0, nb), nk),
                prop::collection::vec(prop::collection::vec(0.5f64..12.0, nb), nk),
                0.5f64..10.0,
                prop::bool::ANY,
            )
        })
        .prop_map(|(lambda, risk, slack, unit_alpha)| {
            let total: f64 = lambda.iter().flatten().sum();
            let alpha = if unit_alpha { 1.0 } else { -(0.05f64.ln()) };
            Instance::from_rows(lambda, risk, total + slack, alpha).unwrap()
        })
}

fn trace_strategy() -> impl Strategy<Value = (ArrivalTrace, CapacityTrace)> {
    (1usize..=2, 1usize..=3, 1usize..=25)
        .prop_flat_map(|(nk, nb, days)| {
            (
                prop::collection::vec(prop::collection::vec(0u32..5, nk * nb), days),
                prop::collection::vec(0u32..10, days),
                Just((nk, nb)),
            )
        })
        .prop_map(|(counts, cap, (nk, nb))| {
            let days = counts.into_iter().map(|c| Grid::from_vec(nk, nb, c).unwrap()).collect();
            let arrivals = ArrivalTrace::from_counts(
                (0..nk).map(|k| format!("k{k}")).collect(),
                (0..nb).map(|b| format!("b{b}")).collect(),
                days,
            )
            .unwrap();
            (arrivals, CapacityTrace::new(cap).unwrap())
        })
}

fn policy_for(arrivals: &ArrivalTrace, raw: &[f64]) -> BoroughPolicy {
    let (nk, nb) = arrivals.shape();
    let need = BoroughPolicy::vector_len(nk, nb);
    let v: Vec<f64> = raw.iter().cycle().take(need).copied().collect();
    BoroughPolicy::from_vector(&v, nk, nb).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(w in prop::collection::vec(0.0f64..100.0, 1..8)) {
        let once = normalize_weights(&w);
        prop_assert_eq!(normalize_weights(&once), once.clone());
        let total: f64 = once.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_scale_free(w in prop::collection::vec(0.01f64..100.0, 1..8), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        for (a, b) in normalize_weights(&w).iter().zip(normalize_weights(&scaled)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_vector_round_trip(raw in prop::collection::vec(0.0f64..1.0, 10)) {
        let p = BoroughPolicy::from_vector(&raw, 2, 2).unwrap();
        prop_assert_eq!(BoroughPolicy::from_vector(&p.to_vector(), 2, 2).unwrap(), p);
    }

    #[test]
    fn weighted_solutions_are_feasible_and_optimal(inst in instance_strategy(), gamma in 0.0f64..=1.0) {
        let sol = solve_weighted(&inst, WeightedObjectiveConfig::new(gamma).unwrap()).unwrap();
        let report = verify_solution(&inst, &sol).unwrap();
        prop_assert!(report.max_violation() <= 1e-9 * inst.total_budget().max(1.0));
        prop_assert!(kkt_residual(&inst, &sol, gamma) <= 1e-6);
        let ef = solve_extreme_efficiency(&inst).unwrap();
        let eq = solve_extreme_equity(&inst).unwrap();
        let tol = 1e-9 * sol.objective(gamma);
        prop_assert!(sol.objective(gamma) <= ef.objective(gamma) + tol);
        prop_assert!(sol.objective(gamma) <= eq.objective(gamma) + tol);
        prop_assert!(sol.f <= sol.g + tol);
    }

    #[test]
    fn single_precision_tracks_double(inst in instance_strategy(), gamma in 0.0f64..=1.0) {
        let lambda: Vec<Vec<f32>> = (0..inst.n_categories())
            .map(|k| (0..inst.n_boroughs()).map(|b| inst.lambda().at(k, b) as f32).collect())
            .collect();
        let risk: Vec<Vec<f32>> = (0..inst.n_categories())
            .map(|k| (0..inst.n_boroughs()).map(|b| inst.risk().at(k, b) as f32).collect())
            .collect();
        let narrow = Instance32::from_rows(lambda, risk, inst.total_budget() as f32, inst.tail_param() as f32).unwrap();
        let wide = solve_weighted(&inst, WeightedObjectiveConfig::new(gamma).unwrap()).unwrap();
        let single = solve_weighted(&narrow, WeightedObjectiveConfig::new(gamma as f32).unwrap()).unwrap();
        let (a, b) = (wide.objective(gamma), f64::from(single.objective(gamma as f32)));
        prop_assert!((a - b).abs() <= 1e-3 * a, "{} vs {}", a, b);
    }

    #[test]
    fn simulation_invariants((arrivals, capacity) in trace_strategy(),
                             raw in prop::collection::vec(0.0f64..1.0, 1..30),
                             rho in 0.0f64..=1.0, review in 1u32..6, seed in any::<u64>()) {
        let policy = policy_for(&arrivals, &raw);
        let cfg = SimulationConfig::new(review, rho, seed).unwrap();
        let out = simulate_borough_policy(&arrivals, &capacity, &policy, &cfg).unwrap();
        prop_assert_eq!(&out, &simulate_borough_policy(&arrivals, &capacity, &policy, &cfg).unwrap());
        for ((k, b), c) in out.fate_counts().iter() {
            prop_assert_eq!(c.inspected + c.dropped + c.backlog, arrivals.totals().at(k, b));
        }
        for (t, n) in out.daily_inspections().into_iter().enumerate() {
            prop_assert!(n <= u64::from(capacity.daily()[t]));
        }
        for inc in &out.incidents {
            if let Fate::Inspected { day } | Fate::Dropped { day } = inc.fate {
                prop_assert!(day >= inc.arrival_day);
            }
        }
    }

    #[test]
    fn faster_service_never_costs_more((arrivals, capacity) in trace_strategy(),
                                       raw in prop::collection::vec(0.0f64..1.0, 1..30),
                                       pick in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let policy = policy_for(&arrivals, &raw);
        let cfg = SimulationConfig::new(3, 0.5, seed).unwrap();
        let out = simulate_borough_policy(&arrivals, &capacity, &policy, &cfg).unwrap();
        let inspected: Vec<usize> = (0..out.incidents.len())
            .filter(|&i| matches!(out.incidents[i].fate, Fate::Inspected { day } if day > out.incidents[i].arrival_day))
            .collect();
        prop_assume!(!inspected.is_empty());
        let i = inspected[pick.index(inspected.len())];
        let mut faster = out.clone();
        if let Fate::Inspected { day } = faster.incidents[i].fate {
            faster.incidents[i].fate = Fate::Inspected { day: day - 1 };
        }
        let (nk, nb) = arrivals.shape();
        let cfg = MetricsConfig::new(75.0, 100.0, EquityKind::MaxCost, Grid::filled(nk, nb, 3.0)).unwrap();
        let before = compute_losses(&out, &cfg).unwrap();
        let after = compute_losses(&faster, &cfg).unwrap();
        for (a, b) in after.cost_b.iter().zip(&before.cost_b) {
            prop_assert!(a <= b);
        }
        prop_assert!(after.f <= after.g);
    }

    #[test]
    fn pareto_filter_is_exact(pts in prop::collection::vec((0u8..8, 0u8..8), 0..30)) {
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(a, b)| (f64::from(a), f64::from(b))).collect();
        let keep = pareto_filter(&pts);
        for i in 0..pts.len() {
            let dominated = pts.iter().any(|&q| dominates(q, pts[i]));
            prop_assert_eq!(keep.contains(&i), !dominated);
        }
        let front: Vec<(f64, f64)> = keep.iter().map(|&i| pts[i]).collect();
        let hv_front = hypervolume(&front, (9.0, 9.0)).unwrap();
        prop_assert_eq!(hypervolume(&pts, (9.0, 9.0)).unwrap(), hv_front);
    }
}

fn small_trace() -> (ArrivalTrace, CapacityTrace) {
    let days = (0..40u32)
        .map(|t| Grid::from_vec(2, 2, vec![t % 3, (t + 1) % 4, 2, t % 2]).unwrap())
        .collect();
    let arrivals = ArrivalTrace::from_counts(
        vec!["a".into(), "b".into()],
        vec!["x".into(), "y".into()],
        days,
    )
    .unwrap();
    (arrivals, CapacityTrace::new((0..40).map(|t| 2 + t % 4).collect()).unwrap())
}

fn metrics() -> MetricsConfig<f64> {
    MetricsConfig::new(50.0, 100.0, EquityKind::Range, Grid::from_rows(vec![vec![4.0, 8.0], vec![6.0, 12.0]]).unwrap())
        .unwrap()
}

fn batch() -> Vec<Policy> {
    (0..6)
        .map(|i| {
            let raw: Vec<f64> = (0..10).map(|j| ((i * 7 + j * 3) % 10) as f64 / 10.0).collect();
            BoroughPolicy::from_vector(&raw, 2, 2).unwrap().into()
        })
        .collect()
}

#[test]
fn batch_evaluation_is_permutation_invariant() {
    let (a, c) = small_trace();
    let cfg = SimulationConfig::new(3, 0.4, 12).unwrap();
    let policies = batch();
    let forward = evaluate_policy_batch(&policies, &a, &c, &cfg, &metrics(), 2);
    let mut reversed_policies = policies.clone();
    reversed_policies.reverse();
    let mut backward = evaluate_policy_batch(&reversed_policies, &a, &c, &cfg, &metrics(), 2);
    backward.reverse();
    assert_eq!(forward, backward);
    assert_eq!(forward, evaluate_policy_batch(&policies, &a, &c, &cfg, &metrics(), 2));
}

#[test]
fn out_of_sample_on_training_trace_reproduces_scores() {
    let (a, c) = small_trace();
    let cfg = SimulationConfig::new(3, 0.4, 12).unwrap();
    let policies = batch();
    let scores: Vec<_> = evaluate_policy_batch(&policies, &a, &c, &cfg, &metrics(), 1)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let front = ParetoFront {
        entries: policies
            .iter()
            .zip(&scores)
            .enumerate()
            .map(|(id, (p, s))| FrontEntry {
                id,
                policy: p.clone(),
                g: s.g,
                f: s.f,
                seed_averaged: false,
            })
            .collect(),
        reference_point: (1e9, 1e9),
    };
    let held = out_of_sample(&front, &policies[0], &a, &c, &cfg, &metrics(), 1).unwrap();
    assert_eq!(held.entries, scores);
    assert_eq!(held.ratios[0], (1.0, 1.0));
}

#[test]
fn synthetic_counts_follow_their_rates() {
    use slaforge_core::sim::generate_synthetic_trace;
    let inst = Instance::from_rows(vec![vec![0.3, 2.0], vec![4.5, 1.0]], vec![vec![1.0; 2]; 2], 10.0, 1.0).unwrap();
    let days = 100_000;
    let (a, c) = generate_synthetic_trace(&inst, days, 0.8, 2024).unwrap();
    for ((k, b), &n) in a.totals().iter() {
        let lambda = inst.lambda().at(k, b);
        let mean = n as f64 / days as f64;
        assert!((mean - lambda).abs() <= 3.0 * (lambda / days as f64).sqrt(), "({k},{b}) mean {mean}");
    }
    let cap_mean = c.total() as f64 / days as f64;
    assert!((cap_mean - 8.0).abs() <= 3.0 * (8.0 / days as f64).sqrt());
}
