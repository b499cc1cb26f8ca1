//! Multi-objective policy search: batch evaluation, Pareto filtering,
//! hypervolume tracking and held-out re-evaluation.
//!
//! Candidate batches come from a scrambled Sobol sequence or from mutating the
//! current front. Every policy is simulated with the same per-replicate seeds
//! (derived from the simulation seed only), so scores of different policies are
//! directly comparable and batch order never affects results.

mod pareto;
mod sampler;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::metrics::{compute_losses, MetricsConfig, MetricsError};
use crate::model::{ArrivalTrace, BoroughBudgetPolicy, CapacityTrace, CityBudgetPolicy, ModelError};
use crate::sim::{
    derive_city_inspection_fractions, simulate_borough_policy, simulate_city_policy, SimError, SimulationConfig,
    SimulationOutcome,
};

pub use pareto::{dominates, hypervolume, pareto_filter};
use sampler::Layout;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("point {point:?} lies outside the reference box {reference:?}")]
    PointOutsideReference { point: (f64, f64), reference: (f64, f64) },
    #[error("none of the {evaluated} proposed policies could be evaluated (last error: {last_error})")]
    NoFeasiblePolicy { evaluated: usize, last_error: String },
    #[error("invalid search setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyClass {
    BoroughBudget,
    CityBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    SobolRandom,
    Evolutionary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Borough(BoroughBudgetPolicy<f64>),
    City(CityBudgetPolicy<f64>),
}

impl Policy {
    pub fn class(&self) -> PolicyClass {
        match self {
            Policy::Borough(_) => PolicyClass::BoroughBudget,
            Policy::City(_) => PolicyClass::CityBudget,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Policy::Borough(p) => p.shape(),
            Policy::City(p) => p.shape(),
        }
    }

    /// Normalized parameter vector (the `from_vector` layout of the class).
    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            Policy::Borough(p) => p.to_vector(),
            Policy::City(p) => p.to_vector(),
        }
    }

    pub fn simulate(
        &self,
        arrivals: &ArrivalTrace,
        capacity: &CapacityTrace,
        config: &SimulationConfig,
    ) -> Result<SimulationOutcome, SimError> {
        match self {
            Policy::Borough(p) => simulate_borough_policy(arrivals, capacity, p, config),
            Policy::City(p) => simulate_city_policy(arrivals, capacity, p, config),
        }
    }
}

impl From<BoroughBudgetPolicy<f64>> for Policy {
    fn from(p: BoroughBudgetPolicy<f64>) -> Self {
        Policy::Borough(p)
    }
}

impl From<CityBudgetPolicy<f64>> for Policy {
    fn from(p: CityBudgetPolicy<f64>) -> Self {
        Policy::City(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub policy_class: PolicyClass,
    pub batch_size: usize,
    pub iterations: usize,
    pub seeds_per_policy: u32,
    pub sampler: Sampler,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(policy_class: PolicyClass, sampler: Sampler, seed: u64) -> Self {
        Self {
            policy_class,
            batch_size: 64,
            iterations: 50,
            seeds_per_policy: 1,
            sampler,
            seed,
        }
    }

    pub fn validated(self) -> Result<Self, SearchError> {
        if self.batch_size == 0 {
            return Err(SearchError::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(SearchError::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.seeds_per_policy == 0 {
            return Err(SearchError::InvalidConfig("seeds per policy must be at least 1".into()));
        }
        Ok(self)
    }
}

/// Seed-averaged scores of one policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub g: f64,
    pub f: f64,
    pub seeds: u32,
}

impl Evaluation {
    pub fn point(&self) -> (f64, f64) {
        (self.g, self.f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    /// Position of the policy in the search's evaluation order.
    pub id: usize,
    pub policy: Policy,
    pub g: f64,
    pub f: f64,
    pub seed_averaged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub entries: Vec<FrontEntry>,
    pub reference_point: (f64, f64),
}

impl ParetoFront {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.g, e.f)).collect()
    }

    /// Hypervolume of the entries inside the reference box.
    pub fn hypervolume(&self) -> f64 {
        let (rg, rf) = self.reference_point;
        let inside: Vec<(f64, f64)> = self.points().into_iter().filter(|&(g, f)| g <= rg && f <= rf).collect();
        hypervolume(&inside, self.reference_point).expect("filtered to the reference box")
    }

    pub fn most_efficient(&self) -> Option<&FrontEntry> {
        self.entries.iter().min_by(|a, b| a.g.total_cmp(&b.g).then(a.f.total_cmp(&b.f)))
    }

    pub fn most_equitable(&self) -> Option<&FrontEntry> {
        self.entries.iter().min_by(|a, b| a.f.total_cmp(&b.f).then(a.g.total_cmp(&b.g)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRun {
    pub front: ParetoFront,
    /// Front hypervolume after each iteration.
    pub hypervolume_history: Vec<f64>,
    pub evaluated: usize,
    pub failed: usize,
}

/// Simulation seed of replicate `r`. Replicate 0 uses the configured seed.
pub fn replicate_seed(seed: u64, replicate: u32) -> u64 {
    if replicate == 0 {
        return seed;
    }
    let mut z = seed ^ u64::from(replicate).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn evaluate_one(
    policy: &Policy,
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
    sim_config: &SimulationConfig,
    metrics_config: &MetricsConfig<f64>,
    seeds: u32,
) -> Result<Evaluation, SearchError> {
    let (mut g, mut f) = (0.0, 0.0);
    for r in 0..seeds {
        let cfg = sim_config.with_seed(replicate_seed(sim_config.seed, r));
        let outcome = policy.simulate(arrivals, capacity, &cfg)?;
        let m = compute_losses(&outcome, metrics_config)?;
        g += m.g;
        f += m.f;
    }
    let n = f64::from(seeds);
    Ok(Evaluation { g: g / n, f: f / n, seeds })
}

/// Scores every policy, in parallel, averaging over `seeds_per_policy`
/// replicates. Results follow input order; one failing policy does not affect
/// the others.
pub fn evaluate_policy_batch(
    policies: &[Policy],
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
    sim_config: &SimulationConfig,
    metrics_config: &MetricsConfig<f64>,
    seeds_per_policy: u32,
) -> Vec<Result<Evaluation, SearchError>> {
    let seeds = seeds_per_policy.max(1);
    policies
        .par_iter()
        .map(|p| evaluate_one(p, arrivals, capacity, sim_config, metrics_config, seeds))
        .collect()
}

/// Builds policies of one class from raw vectors in `[0, ∞)` / `[0, 1]`.
struct PolicyFactory<'a> {
    class: PolicyClass,
    shape: (usize, usize),
    arrivals: &'a ArrivalTrace,
    capacity: &'a CapacityTrace,
    has_arrivals: Vec<bool>,
}

impl<'a> PolicyFactory<'a> {
    fn new(class: PolicyClass, arrivals: &'a ArrivalTrace, capacity: &'a CapacityTrace) -> Self {
        let shape = arrivals.shape();
        let totals = arrivals.totals();
        // Raw city vectors are borough-major, like the policy layout.
        let has_arrivals = (0..shape.1)
            .flat_map(|b| (0..shape.0).map(move |k| (k, b)))
            .map(|(k, b)| totals.at(k, b) > 0)
            .collect();
        Self {
            class,
            shape,
            arrivals,
            capacity,
            has_arrivals,
        }
    }

    fn layout(&self) -> Layout {
        let (nk, nb) = self.shape;
        match self.class {
            PolicyClass::BoroughBudget => Layout {
                dim: BoroughBudgetPolicy::<f64>::vector_len(nk, nb),
                fractions_from: nb + nk * nb,
            },
            PolicyClass::CityBudget => Layout {
                dim: nk * nb,
                fractions_from: nk * nb,
            },
        }
    }

    /// City vectors carry GPS weights only; pairs never seen in training get no
    /// weight and fractions are derived from the training traces.
    fn build(&self, raw: &[f64]) -> Result<Policy, SearchError> {
        let (nk, nb) = self.shape;
        match self.class {
            PolicyClass::BoroughBudget => Ok(Policy::Borough(BoroughBudgetPolicy::from_vector(raw, nk, nb)?)),
            PolicyClass::CityBudget => {
                let masked: Vec<f64> = raw
                    .iter()
                    .zip(&self.has_arrivals)
                    .map(|(&w, &seen)| if seen { w } else { 0.0 })
                    .collect();
                let gps = Grid::from_fn(nk, nb, |k, b| masked[b * nk + k]);
                let gps = if gps.as_slice().iter().all(|&w| w <= 0.0) {
                    Grid::from_fn(nk, nb, |k, b| if self.has_arrivals[b * nk + k] { 1.0 } else { 0.0 })
                } else {
                    gps
                };
                let normalized = CityBudgetPolicy::new(gps.clone(), Grid::filled(nk, nb, 1.0))?;
                let target = derive_city_inspection_fractions(normalized.gps(), self.arrivals, self.capacity)?;
                Ok(Policy::City(CityBudgetPolicy::new(gps, target)?))
            }
        }
    }
}

fn search_seed(seed: u64, iteration: usize) -> u64 {
    replicate_seed(seed ^ 0x5EA2_C4F0_0D5E_ED00, iteration as u32 + 1)
}

/// Iterated propose / evaluate / filter loop.
pub fn run_search(
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
    sim_config: &SimulationConfig,
    metrics_config: &MetricsConfig<f64>,
    search_config: &SearchConfig,
) -> Result<SearchRun, SearchError> {
    let search_config = search_config.clone().validated()?;
    let sim_config = sim_config.validated()?;
    if arrivals.horizon() != capacity.horizon() {
        return Err(SimError::TraceMisaligned {
            arrivals: arrivals.horizon(),
            capacity: capacity.horizon(),
        }
        .into());
    }
    if metrics_config.risk().shape() != arrivals.shape() {
        return Err(MetricsError::RiskShape {
            risk: metrics_config.risk().shape(),
            outcome: arrivals.shape(),
        }
        .into());
    }

    let factory = PolicyFactory::new(search_config.policy_class, arrivals, capacity);
    let layout = factory.layout();
    let batch = search_config.batch_size;

    let mut front: Vec<(Vec<f64>, FrontEntry)> = Vec::new();
    let mut reference: Option<(f64, f64)> = None;
    let mut history = Vec::with_capacity(search_config.iterations);
    let mut evaluated = 0usize;
    let mut failed = 0usize;
    let mut last_error = String::new();

    for it in 0..search_config.iterations {
        let raws = match search_config.sampler {
            Sampler::Evolutionary if !front.is_empty() => {
                let parents: Vec<Vec<f64>> = front.iter().map(|(raw, _)| raw.clone()).collect();
                sampler::evolve_batch(&parents, batch, &layout, search_seed(search_config.seed, it))
            }
            _ => sampler::sobol_batch((it * batch) as u64, batch, &layout, search_config.seed),
        };

        let mut built = Vec::with_capacity(raws.len());
        let mut build_errors = Vec::new();
        for raw in raws {
            match factory.build(&raw) {
                Ok(p) => built.push((raw, p)),
                Err(e) => build_errors.push(e),
            }
        }
        let policies: Vec<Policy> = built.iter().map(|(_, p)| p.clone()).collect();
        let results = evaluate_policy_batch(
            &policies,
            arrivals,
            capacity,
            &sim_config,
            metrics_config,
            search_config.seeds_per_policy,
        );

        failed += build_errors.len();
        if let Some(e) = build_errors.last() {
            last_error = e.to_string();
        }
        let base_id = evaluated;
        evaluated += batch;

        let mut fresh = Vec::new();
        for (j, ((raw, policy), res)) in built.into_iter().zip(results).enumerate() {
            match res {
                Ok(ev) => fresh.push((
                    raw,
                    FrontEntry {
                        id: base_id + j,
                        policy,
                        g: ev.g,
                        f: ev.f,
                        seed_averaged: ev.seeds > 1,
                    },
                )),
                Err(e) => {
                    failed += 1;
                    last_error = e.to_string();
                }
            }
        }

        if reference.is_none() && !fresh.is_empty() {
            let gmax = fresh.iter().map(|(_, e)| e.g).fold(0.0, f64::max);
            let fmax = fresh.iter().map(|(_, e)| e.f).fold(0.0, f64::max);
            let scale = |m: f64| if m > 0.0 { 1.1 * m } else { 1.0 };
            reference = Some((scale(gmax), scale(fmax)));
        }

        front.extend(fresh);
        let points: Vec<(f64, f64)> = front.iter().map(|(_, e)| (e.g, e.f)).collect();
        let keep = pareto_filter(&points);
        let mut keep_iter = keep.into_iter().peekable();
        front = front
            .into_iter()
            .enumerate()
            .filter_map(|(i, item)| {
                if keep_iter.peek() == Some(&i) {
                    keep_iter.next();
                    Some(item)
                } else {
                    None
                }
            })
            .collect();

        let hv = match reference {
            Some(r) => ParetoFront {
                entries: front.iter().map(|(_, e)| e.clone()).collect(),
                reference_point: r,
            }
            .hypervolume(),
            None => 0.0,
        };
        history.push(hv);
    }

    let Some(reference_point) = reference else {
        return Err(SearchError::NoFeasiblePolicy { evaluated, last_error });
    };
    let mut entries: Vec<FrontEntry> = front.into_iter().map(|(_, e)| e).collect();
    entries.sort_by(|a, b| a.g.total_cmp(&b.g).then(a.f.total_cmp(&b.f)).then(a.id.cmp(&b.id)));
    Ok(SearchRun {
        front: ParetoFront { entries, reference_point },
        hypervolume_history: history,
        evaluated,
        failed,
    })
}

/// Held-out scores of front policies and of a baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutOfSample {
    pub entries: Vec<Evaluation>,
    pub baseline: Evaluation,
    /// `(g / g_baseline, f / f_baseline)` per entry.
    pub ratios: Vec<(f64, f64)>,
}

impl OutOfSample {
    /// Index of the entry with the smallest held-out `g`.
    pub fn most_efficient(&self) -> Option<usize> {
        (0..self.entries.len()).min_by(|&i, &j| self.entries[i].g.total_cmp(&self.entries[j].g))
    }

    pub fn most_equitable(&self) -> Option<usize> {
        (0..self.entries.len()).min_by(|&i, &j| self.entries[i].f.total_cmp(&self.entries[j].f))
    }
}

fn ratio(x: f64, base: f64) -> f64 {
    if base != 0.0 {
        x / base
    } else if x == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Re-evaluates the front policies (with their trained parameters) on new
/// traces, relative to `baseline`.
pub fn out_of_sample(
    front: &ParetoFront,
    baseline: &Policy,
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
    sim_config: &SimulationConfig,
    metrics_config: &MetricsConfig<f64>,
    seeds_per_policy: u32,
) -> Result<OutOfSample, SearchError> {
    let mut policies: Vec<Policy> = front.entries.iter().map(|e| e.policy.clone()).collect();
    policies.push(baseline.clone());
    let mut results = evaluate_policy_batch(&policies, arrivals, capacity, sim_config, metrics_config, seeds_per_policy)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = results.pop().expect("baseline evaluated");
    let ratios = results
        .iter()
        .map(|e| (ratio(e.g, baseline.g), ratio(e.f, baseline.f)))
        .collect();
    Ok(OutOfSample {
        entries: results,
        baseline,
        ratios,
    })
}
