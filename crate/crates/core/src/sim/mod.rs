//! Daily discrete-event simulation of inspection scheduling.
//!
//! Each run owns one `ChaCha8Rng` seeded from [`SimulationConfig::seed`].
//! Randomness is consumed in a fixed order every day: entry thinning (city
//! policies), borough capacity split, then per borough (canonical order) the
//! category split followed by within-queue selection in category order, and
//! finally the review-period drop pass over boroughs, categories and queue
//! positions. Identical inputs and seed give identical outcomes.

mod borough;
mod city;
pub(crate) mod sampling;
mod synth;

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::model::{ArrivalTrace, CapacityTrace, IncidentRecord, ModelError};

pub use borough::simulate_borough_policy;
pub use city::{derive_city_inspection_fractions, simulate_city_policy};
pub use synth::generate_synthetic_trace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("arrival trace has {arrivals} days but capacity trace has {capacity}")]
    TraceMisaligned { arrivals: usize, capacity: usize },
    #[error("policy shape {policy:?} does not match trace shape {trace:?}")]
    PolicyShape {
        policy: (usize, usize),
        trace: (usize, usize),
    },
    #[error("invalid simulation setting: {0}")]
    InvalidConfig(String),
    #[error("pair (category {category}, borough {borough}) has positive weight but no arrivals")]
    ZeroArrivalPair { category: usize, borough: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Simulator hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Backlogs are reviewed for dropping at the end of every day `t` (1-based) with `t mod D = 0`.
    pub review_period: u32,
    /// FCFS violation `ρ ∈ [0, 1]`: 0 is strict FCFS, 1 samples the whole backlog.
    pub fcfs_violation: f64,
    pub seed: u64,
    /// Number of back-to-back copies of the input traces to simulate.
    pub trace_repeats: u32,
}

impl SimulationConfig {
    pub fn new(review_period: u32, fcfs_violation: f64, seed: u64) -> Result<Self, SimError> {
        Self {
            review_period,
            fcfs_violation,
            seed,
            trace_repeats: 1,
        }
        .validated()
    }

    pub fn with_trace_repeats(mut self, repeats: u32) -> Result<Self, SimError> {
        self.trace_repeats = repeats;
        self.validated()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validated(self) -> Result<Self, SimError> {
        if self.review_period == 0 {
            return Err(SimError::InvalidConfig("review period must be at least 1 day".into()));
        }
        if !(0.0..=1.0).contains(&self.fcfs_violation) {
            return Err(SimError::InvalidConfig("FCFS violation must lie in [0, 1]".into()));
        }
        if self.trace_repeats == 0 {
            return Err(SimError::InvalidConfig("trace repeats must be at least 1".into()));
        }
        Ok(self)
    }
}

/// What happened to one incident.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fate {
    Inspected { day: u32 },
    Dropped { day: u32 },
    /// Still waiting when the simulation ended.
    Backlog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentOutcome {
    pub category: usize,
    pub borough: usize,
    pub region: Option<u32>,
    pub arrival_day: u32,
    pub fate: Fate,
}

impl IncidentOutcome {
    /// Inspection delay in days, for inspected incidents.
    pub fn delay(&self) -> Option<u32> {
        match self.fate {
            Fate::Inspected { day } => Some(day - self.arrival_day),
            _ => None,
        }
    }
}

/// Per-incident fates of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub n_categories: usize,
    pub n_boroughs: usize,
    /// Simulated days, including trace repeats.
    pub horizon: usize,
    /// Incidents in arrival order.
    pub incidents: Vec<IncidentOutcome>,
    /// Daily city-wide capacity actually offered, including repeats.
    pub capacity: Vec<u32>,
    pub regions: Vec<String>,
}

/// Fate counts of one (category, borough) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FateCounts {
    pub arrivals: u64,
    pub inspected: u64,
    pub dropped: u64,
    pub backlog: u64,
}

impl SimulationOutcome {
    pub fn fate_counts(&self) -> Grid<FateCounts> {
        let mut grid = Grid::filled(self.n_categories, self.n_boroughs, FateCounts::default());
        for inc in &self.incidents {
            let c = grid.get_mut(inc.category, inc.borough);
            c.arrivals += 1;
            match inc.fate {
                Fate::Inspected { .. } => c.inspected += 1,
                Fate::Dropped { .. } => c.dropped += 1,
                Fate::Backlog => c.backlog += 1,
            }
        }
        grid
    }

    /// Inspections performed on each simulated day.
    pub fn daily_inspections(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.horizon];
        for inc in &self.incidents {
            if let Fate::Inspected { day } = inc.fate {
                out[day as usize] += 1;
            }
        }
        out
    }

    /// Inspection delays of one pair, in incident order.
    pub fn delays(&self, k: usize, b: usize) -> Vec<u32> {
        self.incidents
            .iter()
            .filter(|i| i.category == k && i.borough == b)
            .filter_map(IncidentOutcome::delay)
            .collect()
    }
}

fn check_alignment(arrivals: &ArrivalTrace, capacity: &CapacityTrace) -> Result<(), SimError> {
    if arrivals.horizon() != capacity.horizon() {
        return Err(SimError::TraceMisaligned {
            arrivals: arrivals.horizon(),
            capacity: capacity.horizon(),
        });
    }
    Ok(())
}

/// Incidents and capacities after concatenating the traces `repeats` times.
fn expand(arrivals: &ArrivalTrace, capacity: &CapacityTrace, repeats: u32) -> (Vec<IncidentRecord>, Vec<u32>) {
    let base = arrivals.incidents();
    let horizon = arrivals.horizon() as u32;
    let mut incidents = Vec::with_capacity(base.len() * repeats as usize);
    let mut cap = Vec::with_capacity(capacity.horizon() * repeats as usize);
    for rep in 0..repeats {
        incidents.extend(base.iter().map(|r| IncidentRecord {
            day: r.day + rep * horizon,
            ..*r
        }));
        cap.extend_from_slice(capacity.daily());
    }
    (incidents, cap)
}

/// Mutable run state: per-pair FIFO queues of incident indices plus fates.
struct RunState {
    n_boroughs: usize,
    queues: Vec<VecDeque<usize>>,
    outcomes: Vec<IncidentOutcome>,
}

impl RunState {
    fn new(n_categories: usize, n_boroughs: usize, incidents: &[IncidentRecord]) -> Self {
        Self {
            n_boroughs,
            queues: vec![VecDeque::new(); n_categories * n_boroughs],
            outcomes: incidents
                .iter()
                .map(|r| IncidentOutcome {
                    category: r.category,
                    borough: r.borough,
                    region: r.region,
                    arrival_day: r.day,
                    fate: Fate::Backlog,
                })
                .collect(),
        }
    }

    fn queue_index(&self, k: usize, b: usize) -> usize {
        k * self.n_boroughs + b
    }

    fn backlog(&self, k: usize, b: usize) -> u64 {
        self.queues[self.queue_index(k, b)].len() as u64
    }

    fn enqueue(&mut self, incident: usize) {
        let o = self.outcomes[incident];
        let q = self.queue_index(o.category, o.borough);
        self.queues[q].push_back(incident);
    }

    fn drop_now(&mut self, incident: usize, day: u32) {
        self.outcomes[incident].fate = Fate::Dropped { day };
    }

    /// Inspects `count` incidents of one queue, sampled uniformly from the
    /// earliest `⌈ρ (B - count)⌉ + count` entries.
    fn serve<R: Rng + ?Sized>(&mut self, rng: &mut R, k: usize, b: usize, count: usize, rho: f64, day: u32) {
        if count == 0 {
            return;
        }
        let q = self.queue_index(k, b);
        let queue = &mut self.queues[q];
        let backlog = queue.len();
        debug_assert!(count <= backlog);
        let extra = (rho * (backlog - count) as f64).ceil() as usize;
        let window = (count + extra).min(backlog);
        let mut picked = vec![false; window];
        if window == count {
            picked.iter_mut().for_each(|p| *p = true);
        } else {
            for i in index::sample(rng, window, count) {
                picked[i] = true;
            }
        }
        let head: Vec<usize> = queue.drain(..window).collect();
        for (pos, incident) in head.into_iter().enumerate().rev() {
            if picked[pos] {
                self.outcomes[incident].fate = Fate::Inspected { day };
            } else {
                queue.push_front(incident);
            }
        }
    }

    fn finish(self, n_categories: usize, horizon: usize, capacity: Vec<u32>, regions: Vec<String>) -> SimulationOutcome {
        SimulationOutcome {
            n_categories,
            n_boroughs: self.n_boroughs,
            horizon,
            incidents: self.outcomes,
            capacity,
            regions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::new(0, 0.0, 1).is_err());
        assert!(SimulationConfig::new(1, 1.5, 1).is_err());
        assert!(SimulationConfig::new(1, 0.5, 1).unwrap().with_trace_repeats(0).is_err());
        assert_eq!(SimulationConfig::new(7, 0.5, 1).unwrap().trace_repeats, 1);
    }
}
