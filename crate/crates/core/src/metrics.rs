//! Empirical SLAs, inspection fractions and loss functions of simulated runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::sim::{Fate, IncidentOutcome, SimulationOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("percentile must lie strictly between 0 and 100, got {0}")]
    BadPercentile(f64),
    #[error("drop cost must be positive and finite")]
    BadDropCost,
    #[error("risk matrix is {risk:?} but the outcome has shape {outcome:?}")]
    RiskShape {
        risk: (usize, usize),
        outcome: (usize, usize),
    },
    #[error("risk levels must be finite and non-negative")]
    BadRisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquityKind {
    /// Sum over categories of the cross-borough range of risk-weighted SLAs.
    Range,
    /// Largest borough cost.
    MaxCost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsConfig<T> {
    sla_percentile: f64,
    drop_cost: T,
    equity_kind: EquityKind,
    risk: Grid<T>,
}

impl<T: Scalar> MetricsConfig<T> {
    pub fn new(sla_percentile: f64, drop_cost: T, equity_kind: EquityKind, risk: Grid<T>) -> Result<Self, MetricsError> {
        check_percentile(sla_percentile)?;
        if !(drop_cost.is_finite() && drop_cost > T::zero()) {
            return Err(MetricsError::BadDropCost);
        }
        if risk.as_slice().iter().any(|r| !r.is_finite() || *r < T::zero()) {
            return Err(MetricsError::BadRisk);
        }
        Ok(Self {
            sla_percentile,
            drop_cost,
            equity_kind,
            risk,
        })
    }

    pub fn sla_percentile(&self) -> f64 {
        self.sla_percentile
    }

    pub fn drop_cost(&self) -> T {
        self.drop_cost
    }

    pub fn equity_kind(&self) -> EquityKind {
        self.equity_kind
    }

    pub fn risk(&self) -> &Grid<T> {
        &self.risk
    }

    pub fn with_equity_kind(mut self, kind: EquityKind) -> Self {
        self.equity_kind = kind;
        self
    }

    pub fn with_drop_cost(mut self, drop_cost: T) -> Result<Self, MetricsError> {
        self.drop_cost = drop_cost;
        Self::new(self.sla_percentile, self.drop_cost, self.equity_kind, self.risk)
    }
}

/// Scores of one simulated run. Absent entries mark pairs without inspections
/// (`z_hat`) or without arrivals (`p_hat`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyMetrics<T> {
    pub z_hat: Grid<Option<T>>,
    pub p_hat: Grid<Option<T>>,
    pub cost_b: Vec<T>,
    pub g: T,
    pub f: T,
}

fn check_percentile(q: f64) -> Result<(), MetricsError> {
    if q > 0.0 && q < 100.0 {
        Ok(())
    } else {
        Err(MetricsError::BadPercentile(q))
    }
}

/// Nearest-rank percentile of a non-empty sample; sorts in place.
fn nearest_rank(sample: &mut [u32], q: f64) -> u32 {
    sample.sort_unstable();
    let rank = ((q * sample.len() as f64) / 100.0).ceil() as usize;
    sample[rank.clamp(1, sample.len()) - 1]
}

/// Per-pair `q`-th percentile of inspection delays, by nearest rank.
pub fn empirical_sla<T: Scalar>(outcome: &SimulationOutcome, percentile: f64) -> Result<Grid<Option<T>>, MetricsError> {
    check_percentile(percentile)?;
    let mut delays: Grid<Vec<u32>> = Grid::filled(outcome.n_categories, outcome.n_boroughs, Vec::new());
    for inc in &outcome.incidents {
        if let Some(d) = inc.delay() {
            delays.get_mut(inc.category, inc.borough).push(d);
        }
    }
    Ok(delays.map(|sample| {
        if sample.is_empty() {
            None
        } else {
            let mut s = sample.clone();
            Some(T::of(f64::from(nearest_rank(&mut s, percentile))))
        }
    }))
}

/// Fraction of arrivals inspected per pair. End-of-run backlog counts as
/// uninspected.
pub fn inspection_fractions<T: Scalar>(outcome: &SimulationOutcome) -> Grid<Option<T>> {
    outcome.fate_counts().map(|c| {
        if c.arrivals == 0 {
            None
        } else {
            Some(T::of(c.inspected as f64 / c.arrivals as f64))
        }
    })
}

/// `N [p̂ r ẑ + drop · r (1 − p̂)]` for one group of incidents.
fn group_cost<T: Scalar>(arrivals: u64, p_hat: T, z_hat: Option<T>, risk: T, drop_cost: T) -> T {
    let served = z_hat.map_or(T::zero(), |z| p_hat * risk * z);
    T::of(arrivals as f64) * (served + drop_cost * risk * (T::one() - p_hat))
}

pub fn compute_losses<T: Scalar>(outcome: &SimulationOutcome, config: &MetricsConfig<T>) -> Result<PolicyMetrics<T>, MetricsError> {
    let shape = (outcome.n_categories, outcome.n_boroughs);
    if config.risk.shape() != shape {
        return Err(MetricsError::RiskShape {
            risk: config.risk.shape(),
            outcome: shape,
        });
    }
    let z_hat = empirical_sla::<T>(outcome, config.sla_percentile)?;
    let p_hat = inspection_fractions::<T>(outcome);
    let counts = outcome.fate_counts();
    let (nk, nb) = shape;

    let mut cost_b = vec![T::zero(); nb];
    for ((k, b), c) in counts.iter() {
        if let Some(p) = p_hat.at(k, b) {
            cost_b[b] = cost_b[b] + group_cost(c.arrivals, p, z_hat.at(k, b), config.risk.at(k, b), config.drop_cost);
        }
    }
    let g = cost_b.iter().copied().sum();
    let f = match config.equity_kind {
        EquityKind::MaxCost => cost_b.iter().copied().fold(T::zero(), T::max),
        EquityKind::Range => (0..nk)
            .map(|k| {
                let weighted: Vec<T> = (0..nb)
                    .filter_map(|b| z_hat.at(k, b).map(|z| config.risk.at(k, b) * z))
                    .collect();
                if weighted.is_empty() {
                    T::zero()
                } else {
                    let hi = weighted.iter().copied().fold(T::neg_infinity(), T::max);
                    let lo = weighted.iter().copied().fold(T::infinity(), T::min);
                    hi - lo
                }
            })
            .sum(),
    };
    Ok(PolicyMetrics { z_hat, p_hat, cost_b, g, f })
}

/// Costs grouped by an arbitrary key instead of by borough. Incidents for which
/// `region_key` returns `None` are ignored; keys without incidents are absent.
pub fn group_costs<T, K, F>(outcome: &SimulationOutcome, region_key: F, config: &MetricsConfig<T>) -> Result<BTreeMap<K, T>, MetricsError>
where
    T: Scalar,
    K: Ord + Clone,
    F: Fn(&IncidentOutcome) -> Option<K>,
{
    let shape = (outcome.n_categories, outcome.n_boroughs);
    if config.risk.shape() != shape {
        return Err(MetricsError::RiskShape {
            risk: config.risk.shape(),
            outcome: shape,
        });
    }
    #[derive(Default)]
    struct Acc {
        arrivals: u64,
        inspected: u64,
        delays: Vec<u32>,
    }
    let mut groups: BTreeMap<(K, usize, usize), Acc> = BTreeMap::new();
    for inc in &outcome.incidents {
        let Some(key) = region_key(inc) else { continue };
        let acc = groups.entry((key, inc.category, inc.borough)).or_default();
        acc.arrivals += 1;
        if let Fate::Inspected { day } = inc.fate {
            acc.inspected += 1;
            acc.delays.push(day - inc.arrival_day);
        }
    }
    let mut out = BTreeMap::new();
    for ((key, k, b), mut acc) in groups {
        let p = T::of(acc.inspected as f64 / acc.arrivals as f64);
        let z = (!acc.delays.is_empty()).then(|| T::of(f64::from(nearest_rank(&mut acc.delays, config.sla_percentile))));
        let cost = group_cost(acc.arrivals, p, z, config.risk.at(k, b), config.drop_cost);
        let slot = out.entry(key).or_insert_with(T::zero);
        *slot = *slot + cost;
    }
    Ok(out)
}

/// Groups by the region id carried on each incident.
pub fn region_costs<T: Scalar>(outcome: &SimulationOutcome, config: &MetricsConfig<T>) -> Result<BTreeMap<u32, T>, MetricsError> {
    group_costs(outcome, |i| i.region, config)
}
