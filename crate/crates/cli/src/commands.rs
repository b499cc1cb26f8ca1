use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde_json::json;
use slaforge_core::metrics::{compute_losses, MetricsConfig};
use slaforge_core::model::tail_param_from_probability;
use slaforge_core::search::{
    out_of_sample, run_search, FrontEntry, ParetoFront, SearchConfig,
};
use slaforge_core::sim::{generate_synthetic_trace, SimulationConfig};
use slaforge_core::stylized::{
    kkt_residual, price_of_efficiency, price_of_equity, solve_weighted, WeightedObjectiveConfig,
};
use slaforge_core::{ArrivalTrace, CapacityTrace, Grid, Instance};

use crate::config::{default_risk, load, Config, LoadedConfig};
use crate::error::{invalid, runtime, CliError, Result};
use crate::ingest::{align, ingest_arrivals, ingest_capacity, write_arrivals, write_capacity, write_file, DatedArrivals, Ordering};
use crate::instance::{read_front, read_instance, read_policy};
use crate::report::{emit_report, run_id, to_json, FrontPoint, PolicyReport, RunReport};
use crate::{EvaluateArgs, SearchArgs, SimOverrides, SimulateArgs, SolveArgs, SynthArgs};

fn out_line(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))
}

/// Parses `start:end:step` into the inclusive grid of values.
pub fn parse_sweep(range: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("sweep {range:?} must be start:end:step")))?;
    let [start, end, step] = parts[..] else {
        return Err(CliError::Validation(format!("sweep {range:?} must be start:end:step")));
    };
    if !(step > 0.0) || end < start {
        return Err(CliError::Validation("sweep needs step > 0 and end >= start".into()));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| (start + i as f64 * step).min(end)).collect())
}

fn instance_from(path: &Path, budget: f64, alpha: Option<f64>) -> Result<Instance> {
    let alpha = alpha.unwrap_or_else(|| tail_param_from_probability(0.05));
    read_instance(path, budget, alpha)
}

fn named_grid<T: serde::Serialize + Copy>(grid: &Grid<T>, inst: &Instance) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (k, c) in inst.categories().iter().enumerate() {
        let row: serde_json::Map<String, serde_json::Value> = inst
            .boroughs()
            .iter()
            .enumerate()
            .map(|(b, name)| (name.clone(), json!(grid.at(k, b))))
            .collect();
        map.insert(c.clone(), row.into());
    }
    map.into()
}

pub fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let inst = instance_from(&args.instance, args.budget, args.alpha)?;
    let gammas = match &args.sweep {
        Some(range) => parse_sweep(range)?,
        None => vec![args.gamma],
    };
    let mut solutions = Vec::new();
    for &gamma in &gammas {
        let cfg = WeightedObjectiveConfig::new(gamma).map_err(invalid)?;
        let sol = solve_weighted(&inst, cfg).map_err(invalid)?;
        let budgets: serde_json::Map<String, serde_json::Value> = inst
            .boroughs()
            .iter()
            .zip(&sol.budgets)
            .map(|(b, v)| (b.clone(), json!(v)))
            .collect();
        solutions.push(json!({
            "gamma": gamma,
            "objective": sol.objective(gamma),
            "g": sol.g,
            "f": sol.f,
            "kkt_residual": kkt_residual(&inst, &sol, gamma),
            "budgets": budgets,
            "sla_days": named_grid(&sol.z, &inst),
            "gps": named_grid(&sol.phi, &inst),
            "slack": named_grid(&sol.x, &inst),
        }));
    }
    let mut stylized = json!({ "solutions": solutions });
    if inst.n_categories() == 1 && inst.n_boroughs() == 2 {
        stylized["price_of_equity"] = json!(price_of_equity(&inst).map_err(invalid)?);
        stylized["price_of_efficiency"] = json!(price_of_efficiency(&inst).map_err(invalid)?);
    }
    let settings = json!({
        "budget": inst.total_budget(),
        "tail_param": inst.tail_param(),
        "gammas": gammas,
        "lambda": inst.lambda(),
        "risk": inst.risk(),
    });
    let report = RunReport {
        run_id: run_id(&[b"solve", settings.to_string().as_bytes()]),
        command: "solve".into(),
        seed: 0,
        config: String::new(),
        settings,
        categories: inst.categories().to_vec(),
        boroughs: inst.boroughs().to_vec(),
        risk: Some(inst.risk().clone()),
        policies: vec![],
        front: vec![],
        reference_point: None,
        hypervolume_history: vec![],
        stylized: Some(stylized),
    };
    finish(&report, args.out.as_deref(), false, out)
}

/// Writes the report to `out_dir` when given, else prints it.
fn finish(report: &RunReport, out_dir: Option<&Path>, search_artifacts: bool, out: &mut dyn Write) -> Result<()> {
    match out_dir {
        Some(dir) if search_artifacts => {
            emit_report(report, dir)?;
            out_line(out, &format!("wrote report {} to {}", report.run_id, dir.display()))
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            write_file(&dir.join("report.json"), to_json(report).as_bytes())?;
            out_line(out, &format!("wrote report {} to {}", report.run_id, dir.display()))
        }
        None => out.write_all(to_json(report).as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

struct Loaded {
    config: LoadedConfig,
    arrivals: ArrivalTrace,
    capacity: CapacityTrace,
    risk_means: std::collections::HashMap<(usize, usize), f64>,
    start: NaiveDate,
}

fn load_traces(config_path: Option<&Path>, arrivals: &Path, capacity: &Path) -> Result<Loaded> {
    let config = load(config_path)?;
    let ordering = Ordering {
        categories: config.config.data.categories.clone(),
        boroughs: config.config.data.boroughs.clone(),
    };
    let dated: DatedArrivals = ingest_arrivals(arrivals, &ordering)?;
    let cap = ingest_capacity(capacity)?;
    let (arrivals, capacity, start) = align(&dated, &cap, config.config.data.alignment)?;
    Ok(Loaded {
        config,
        arrivals,
        capacity,
        risk_means: dated.risk_means,
        start,
    })
}

/// Risk per pair: config table, then the assigned default for known category
/// names, then the mean of the CSV `risk` column for the pair.
pub fn resolve_risk(
    config: &Config,
    arrivals: &ArrivalTrace,
    risk_means: &std::collections::HashMap<(usize, usize), f64>,
) -> Result<Grid<f64>> {
    let (nk, nb) = arrivals.shape();
    let mut grid = Grid::filled(nk, nb, 0.0);
    for k in 0..nk {
        let name = &arrivals.categories()[k];
        for b in 0..nb {
            let r = config
                .metrics
                .risk
                .get(name)
                .copied()
                .or_else(|| default_risk(name))
                .or_else(|| risk_means.get(&(k, b)).copied())
                .or_else(|| {
                    let vals: Vec<f64> = (0..nb).filter_map(|bb| risk_means.get(&(k, bb)).copied()).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "no risk level for category {name:?}; add it under [metrics.risk] or a risk column"
                    ))
                })?;
            grid.set(k, b, r);
        }
    }
    Ok(grid)
}

fn apply_overrides(config: &mut Config, o: &SimOverrides) {
    let s = &mut config.simulation;
    if let Some(v) = o.review_period {
        s.review_period = v;
    }
    if let Some(v) = o.rho {
        s.fcfs_violation = v;
    }
    if let Some(v) = o.repeats {
        s.trace_repeats = v;
    }
    let m = &mut config.metrics;
    if let Some(v) = o.percentile {
        m.sla_percentile = v;
    }
    if let Some(v) = o.drop_cost {
        m.drop_cost = v;
    }
    if let Some(v) = o.equity {
        m.equity = v.into();
    }
}

fn sim_and_metrics(config: &Config, seed: u64, risk: Grid<f64>) -> Result<(SimulationConfig, MetricsConfig<f64>)> {
    let s = &config.simulation;
    let sim = SimulationConfig::new(s.review_period, s.fcfs_violation, seed)
        .and_then(|c| c.with_trace_repeats(s.trace_repeats))
        .map_err(invalid)?;
    let m = &config.metrics;
    let metrics = MetricsConfig::new(m.sla_percentile, m.drop_cost, m.equity, risk).map_err(invalid)?;
    Ok((sim, metrics))
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut loaded = load_traces(args.config.as_deref(), &args.arrivals, &args.capacity)?;
    apply_overrides(&mut loaded.config.config, &args.overrides);
    let config = &loaded.config.config;
    let risk = resolve_risk(config, &loaded.arrivals, &loaded.risk_means)?;
    let (sim, metrics) = sim_and_metrics(config, args.seed, risk.clone())?;
    let policy = read_policy(&args.policy, loaded.arrivals.categories(), loaded.arrivals.boroughs())?;
    let outcome = policy.simulate(&loaded.arrivals, &loaded.capacity, &sim).map_err(invalid)?;
    let m = compute_losses(&outcome, &metrics).map_err(invalid)?;
    let mut entry = PolicyReport::new("policy".into(), &policy, m.g, m.f);
    entry.detail = Some(m);
    let settings = json!({
        "simulation": sim,
        "metrics": config.metrics,
        "alignment": config.data.alignment,
        "start_date": loaded.start.to_string(),
        "horizon_days": loaded.arrivals.horizon(),
    });
    let report = RunReport {
        run_id: run_id(&[b"simulate", loaded.config.text.as_bytes(), &args.seed.to_le_bytes(), settings.to_string().as_bytes()]),
        command: "simulate".into(),
        seed: args.seed,
        config: loaded.config.text.clone(),
        settings,
        categories: loaded.arrivals.categories().to_vec(),
        boroughs: loaded.arrivals.boroughs().to_vec(),
        risk: Some(risk),
        policies: vec![entry],
        front: vec![],
        reference_point: None,
        hypervolume_history: vec![],
        stylized: None,
    };
    finish(&report, args.out.as_deref(), false, out)
}

pub fn search(args: &SearchArgs, out: &mut dyn Write) -> Result<()> {
    let mut loaded = load_traces(args.config.as_deref(), &args.arrivals, &args.capacity)?;
    apply_overrides(&mut loaded.config.config, &args.overrides);
    let config = &mut loaded.config.config;
    if let Some(c) = args.class {
        config.search.class = c.into();
    }
    if let Some(v) = args.iterations {
        config.search.iterations = v;
    }
    if let Some(v) = args.batch {
        config.search.batch_size = v;
    }
    if let Some(v) = args.sampler {
        config.search.sampler = v.into();
    }
    if let Some(v) = args.seeds_per_policy {
        config.search.seeds_per_policy = v;
    }
    let config = &loaded.config.config;
    let risk = resolve_risk(config, &loaded.arrivals, &loaded.risk_means)?;
    let (sim, metrics) = sim_and_metrics(config, args.seed, risk.clone())?;
    let search_config = SearchConfig {
        policy_class: config.search.class,
        batch_size: config.search.batch_size,
        iterations: config.search.iterations,
        seeds_per_policy: config.search.seeds_per_policy,
        sampler: config.search.sampler,
        seed: args.seed,
    }
    .validated()
    .map_err(invalid)?;
    let run = run_search(&loaded.arrivals, &loaded.capacity, &sim, &metrics, &search_config).map_err(runtime)?;
    let settings = json!({
        "simulation": sim,
        "metrics": config.metrics,
        "search": search_config,
        "alignment": config.data.alignment,
        "start_date": loaded.start.to_string(),
        "horizon_days": loaded.arrivals.horizon(),
        "evaluated": run.evaluated,
        "failed": run.failed,
    });
    let report = RunReport {
        run_id: run_id(&[b"search", loaded.config.text.as_bytes(), &args.seed.to_le_bytes(), settings.to_string().as_bytes()]),
        command: "search".into(),
        seed: args.seed,
        config: loaded.config.text.clone(),
        settings,
        categories: loaded.arrivals.categories().to_vec(),
        boroughs: loaded.arrivals.boroughs().to_vec(),
        risk: Some(risk),
        policies: run.front.entries.iter().map(PolicyReport::from_front).collect(),
        front: run
            .front
            .entries
            .iter()
            .map(|e| FrontPoint {
                policy_id: format!("p{}", e.id),
                g: e.g,
                f: e.f,
            })
            .collect(),
        reference_point: Some(run.front.reference_point),
        hypervolume_history: run.hypervolume_history.clone(),
        stylized: None,
    };
    finish(&report, Some(&args.out), true, out)
}

pub fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let mut loaded = load_traces(args.config.as_deref(), &args.arrivals, &args.capacity)?;
    apply_overrides(&mut loaded.config.config, &args.overrides);
    let config = &loaded.config.config;
    let risk = resolve_risk(config, &loaded.arrivals, &loaded.risk_means)?;
    let (sim, metrics) = sim_and_metrics(config, args.seed, risk.clone())?;
    let (nk, nb) = loaded.arrivals.shape();
    let front_policies = read_front(&args.front, nk, nb)?;
    if front_policies.is_empty() {
        return Err(CliError::EmptyFile(args.front.clone()));
    }
    let baseline = read_policy(&args.baseline, loaded.arrivals.categories(), loaded.arrivals.boroughs())?;
    let front = ParetoFront {
        entries: front_policies
            .iter()
            .enumerate()
            .map(|(i, (_, p))| FrontEntry {
                id: i,
                policy: p.clone(),
                g: f64::NAN,
                f: f64::NAN,
                seed_averaged: false,
            })
            .collect(),
        reference_point: (f64::INFINITY, f64::INFINITY),
    };
    let seeds = config.search.seeds_per_policy;
    let held = out_of_sample(&front, &baseline, &loaded.arrivals, &loaded.capacity, &sim, &metrics, seeds)
        .map_err(runtime)?;

    let eff = held.most_efficient();
    let equ = held.most_equitable();
    let mut table = String::from("policy_id,g,f,g_relative,f_relative,role\n");
    for (i, ((id, _), e)) in front_policies.iter().zip(&held.entries).enumerate() {
        let role = match (Some(i) == eff, Some(i) == equ) {
            (true, true) => "most_efficient+most_equitable",
            (true, false) => "most_efficient",
            (false, true) => "most_equitable",
            _ => "",
        };
        let (rg, rf) = held.ratios[i];
        table.push_str(&format!("{id},{},{},{rg},{rf},{role}\n", e.g, e.f));
    }
    table.push_str(&format!("baseline,{},{},1,1,baseline\n", held.baseline.g, held.baseline.f));

    let mut policies: Vec<PolicyReport> = front_policies
        .iter()
        .zip(&held.entries)
        .map(|((id, p), e)| PolicyReport::new(id.clone(), p, e.g, e.f))
        .collect();
    policies.push(PolicyReport::new("baseline".into(), &baseline, held.baseline.g, held.baseline.f));
    let settings = json!({
        "simulation": sim,
        "metrics": config.metrics,
        "seeds_per_policy": seeds,
        "alignment": config.data.alignment,
        "start_date": loaded.start.to_string(),
        "horizon_days": loaded.arrivals.horizon(),
        "ratios": held.ratios,
    });
    let report = RunReport {
        run_id: run_id(&[b"evaluate", loaded.config.text.as_bytes(), &args.seed.to_le_bytes(), settings.to_string().as_bytes()]),
        command: "evaluate".into(),
        seed: args.seed,
        config: loaded.config.text.clone(),
        settings,
        categories: loaded.arrivals.categories().to_vec(),
        boroughs: loaded.arrivals.boroughs().to_vec(),
        risk: Some(risk),
        policies,
        front: vec![],
        reference_point: None,
        hypervolume_history: vec![],
        stylized: None,
    };
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_file(&dir.join("evaluation.csv"), table.as_bytes())?;
        write_file(&dir.join("report.json"), to_json(&report).as_bytes())?;
    }
    out.write_all(table.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let inst = instance_from(&args.instance, args.budget, args.alpha)?;
    let (arrivals, capacity) = generate_synthetic_trace(&inst, args.days, args.utilization, args.seed).map_err(invalid)?;
    let start = NaiveDate::parse_from_str(&args.start, "%Y-%m-%d")
        .map_err(|_| CliError::Validation(format!("start date {:?} is not YYYY-MM-DD", args.start)))?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let a: PathBuf = args.out.join("arrivals.csv");
    let c: PathBuf = args.out.join("capacity.csv");
    write_arrivals(&a, &arrivals, start)?;
    write_capacity(&c, &capacity, start)?;
    out_line(
        out,
        &format!(
            "wrote {} incidents over {} days to {} and {}",
            arrivals.totals().as_slice().iter().sum::<u64>(),
            arrivals.horizon(),
            a.display(),
            c.display()
        ),
    )
}
