use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sampling::allocate_capped;
use super::{check_alignment, expand, RunState, SimError, SimulationConfig, SimulationOutcome};
use crate::grid::Grid;
use crate::model::{normalize_weights, ArrivalTrace, CapacityTrace, CityBudgetPolicy};
use crate::scalar::Scalar;

/// Simulates one centralized server over all (category, borough) queues.
///
/// Arriving incidents join their queue with probability `p` and are dropped
/// on arrival otherwise. Daily capacity is split over all backlogged pairs by
/// one multinomial on the renormalized GPS weights; the within-queue rule is
/// the same as for borough policies. There is no review-period drop pass.
pub fn simulate_city_policy<T: Scalar>(
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
    policy: &CityBudgetPolicy<T>,
    config: &SimulationConfig,
) -> Result<SimulationOutcome, SimError> {
    let config = config.validated()?;
    check_alignment(arrivals, capacity)?;
    let (nk, nb) = arrivals.shape();
    if policy.shape() != (nk, nb) {
        return Err(SimError::PolicyShape {
            policy: policy.shape(),
            trace: (nk, nb),
        });
    }
    let gps: Vec<f64> = policy.gps().as_slice().iter().map(|v| v.as_f64()).collect();
    let target = policy.target_frac().map(|v| v.as_f64());
    let rho = config.fcfs_violation;

    let (incidents, daily_capacity) = expand(arrivals, capacity, config.trace_repeats);
    let horizon = daily_capacity.len();
    let mut state = RunState::new(nk, nb, &incidents);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut next = 0usize;

    for day in 0..horizon {
        let d = day as u32;
        while next < incidents.len() && incidents[next].day == d {
            let r = incidents[next];
            let p = target.at(r.category, r.borough);
            let admit = p >= 1.0 || (p > 0.0 && rng.random_bool(p));
            if admit {
                state.enqueue(next);
            } else {
                state.drop_now(next, d);
            }
            next += 1;
        }

        let room: Vec<u64> = (0..nk)
            .flat_map(|k| (0..nb).map(move |b| (k, b)))
            .map(|(k, b)| state.backlog(k, b))
            .collect();
        let (alloc, _) = allocate_capped(&mut rng, u64::from(daily_capacity[day]), &room, &gps);
        for (i, &n) in alloc.iter().enumerate() {
            state.serve(&mut rng, i / nb, i % nb, n as usize, rho, d);
        }
    }

    Ok(state.finish(nk, horizon, daily_capacity, arrivals.regions().to_vec()))
}

/// Target inspection fractions implied by global GPS weights.
///
/// `p = φ Σ_t I / Σ_t N` per pair. Pairs whose ratio exceeds 1 are clamped to
/// 1 and the weight they cannot use is shared among the unclamped pairs in
/// proportion to their weights, repeating until no new pair clamps.
pub fn derive_city_inspection_fractions<T: Scalar>(
    gps: &Grid<T>,
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
) -> Result<Grid<T>, SimError> {
    let (nk, nb) = arrivals.shape();
    if gps.shape() != (nk, nb) {
        return Err(SimError::PolicyShape {
            policy: gps.shape(),
            trace: (nk, nb),
        });
    }
    let phi: Vec<f64> = normalize_weights(&gps.as_slice().iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    let totals = arrivals.totals();
    let demand: Vec<f64> = totals.as_slice().iter().map(|&n| n as f64).collect();
    for (i, (&w, &n)) in phi.iter().zip(&demand).enumerate() {
        if w > 0.0 && n == 0.0 {
            return Err(SimError::ZeroArrivalPair {
                category: i / nb,
                borough: i % nb,
            });
        }
    }
    let cap = capacity.total() as f64;
    let mut p = vec![0.0f64; phi.len()];
    let mut clamped = vec![false; phi.len()];
    loop {
        let used: f64 = (0..phi.len())
            .filter(|&i| clamped[i])
            .map(|i| if cap > 0.0 { demand[i] / cap } else { 0.0 })
            .sum();
        let free_weight: f64 = (0..phi.len()).filter(|&i| !clamped[i]).map(|i| phi[i]).sum();
        let remaining = (1.0 - used).max(0.0);
        let mut changed = false;
        for i in 0..phi.len() {
            if clamped[i] {
                continue;
            }
            if phi[i] <= 0.0 || free_weight <= 0.0 {
                p[i] = 0.0;
                continue;
            }
            let weight = phi[i] * remaining / free_weight;
            let ratio = weight * cap / demand[i];
            if ratio > 1.0 {
                clamped[i] = true;
                p[i] = 1.0;
                changed = true;
            } else {
                p[i] = ratio;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Grid::from_vec(nk, nb, p.into_iter().map(T::of).collect()).expect("shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Fate;

    fn trace(totals: &[u32], cap: u32) -> (ArrivalTrace, CapacityTrace) {
        let row = totals.to_vec();
        let a = ArrivalTrace::from_counts(
            vec!["k".into()],
            (0..totals.len()).map(|b| format!("b{b}")).collect(),
            vec![Grid::from_rows(vec![row]).unwrap()],
        )
        .unwrap();
        (a, CapacityTrace::new(vec![cap]).unwrap())
    }

    #[test]
    fn direct_ratio() {
        let (a, c) = trace(&[100, 100], 100);
        let gps = Grid::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        let p: Grid<f64> = derive_city_inspection_fractions(&gps, &a, &c).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn clamps_when_capacity_exceeds_demand() {
        let (a, c) = trace(&[100], 200);
        let gps = Grid::from_rows(vec![vec![1.0]]).unwrap();
        let p: Grid<f64> = derive_city_inspection_fractions(&gps, &a, &c).unwrap();
        assert_eq!(p.as_slice(), &[1.0]);
    }

    #[test]
    fn clamp_redistributes_surplus() {
        let (a, c) = trace(&[50, 100], 100);
        let gps = Grid::from_rows(vec![vec![0.8, 0.2]]).unwrap();
        let p: Grid<f64> = derive_city_inspection_fractions(&gps, &a, &c).unwrap();
        assert_eq!(p.at(0, 0), 1.0);
        assert!((p.at(0, 1) - 0.5).abs() < 1e-12);
        let effective = p.at(0, 0) * 50.0 + p.at(0, 1) * 100.0;
        assert!(effective <= 100.0 + 1e-9);
    }

    #[test]
    fn zero_arrival_pair_rejected() {
        let (a, c) = trace(&[10, 0], 10);
        let gps = Grid::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(
            derive_city_inspection_fractions(&gps, &a, &c).unwrap_err(),
            SimError::ZeroArrivalPair { category: 0, borough: 1 }
        );
    }

    #[test]
    fn full_thinning_drops_everything() {
        let (a, c) = trace(&[3, 2], 10);
        let policy = CityBudgetPolicy::new(
            Grid::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
            Grid::from_rows(vec![vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let cfg = SimulationConfig::new(1, 0.3, 8).unwrap();
        let out = simulate_city_policy(&a, &c, &policy, &cfg).unwrap();
        assert!(out.incidents.iter().all(|i| i.fate == Fate::Dropped { day: 0 }));
    }

    #[test]
    fn single_pair_matches_borough_simulation() {
        let a = ArrivalTrace::from_counts(
            vec!["k".into()],
            vec!["b".into()],
            [5u32, 0, 7, 2, 9, 1, 0, 4].iter().map(|&n| Grid::filled(1, 1, n)).collect(),
        )
        .unwrap();
        let c = CapacityTrace::new(vec![2, 3, 1, 4, 0, 5, 2, 3]).unwrap();
        let cfg = SimulationConfig::new(1_000_000, 0.5, 21).unwrap();
        let city = CityBudgetPolicy::new(Grid::filled(1, 1, 1.0), Grid::filled(1, 1, 1.0)).unwrap();
        let borough = crate::model::BoroughBudgetPolicy::new(vec![1.0], Grid::filled(1, 1, 1.0), Grid::filled(1, 1, 1.0)).unwrap();
        let x = simulate_city_policy(&a, &c, &city, &cfg).unwrap();
        let y = crate::sim::simulate_borough_policy(&a, &c, &borough, &cfg).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn weights_are_scale_free() {
        let (a, c) = trace(&[6, 9], 5);
        let cfg = SimulationConfig::new(1, 0.2, 3).unwrap();
        let half = CityBudgetPolicy::new(Grid::filled(1, 2, 0.5), Grid::filled(1, 2, 0.7)).unwrap();
        let two = CityBudgetPolicy::new(Grid::filled(1, 2, 2.0), Grid::filled(1, 2, 0.7)).unwrap();
        assert_eq!(
            simulate_city_policy(&a, &c, &half, &cfg).unwrap(),
            simulate_city_policy(&a, &c, &two, &cfg).unwrap()
        );
    }
}
