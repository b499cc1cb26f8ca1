//! Domain types: problem instances, analytical solutions, simulation policies and traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("total budget {budget} does not exceed total arrival rate {total_rate}")]
    NonPositiveSlack { budget: f64, total_rate: f64 },
    #[error("risk rating at (category {category}, borough {borough}) must be positive")]
    NonPositiveRisk { category: usize, borough: usize },
    #[error("tail parameter must be positive, got {0}")]
    NonPositiveTail(f64),
    #[error("arrival rate at (category {category}, borough {borough}) must be non-negative")]
    NegativeRate { category: usize, borough: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("entry {index} of the policy vector is negative")]
    NegativeEntry { index: usize },
    #[error("inspection fraction at entry {index} is outside [0, 1]")]
    FractionOutOfRange { index: usize },
    #[error("weights in {0} do not sum to 1")]
    NotNormalized(&'static str),
    #[error("trace horizon must be at least one day")]
    EmptyHorizon,
    #[error("incident record {index} is inconsistent with the trace: {reason}")]
    BadRecord { index: usize, reason: String },
}

/// Parameters of the stylized queuing model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance<T> {
    categories: Vec<String>,
    boroughs: Vec<String>,
    lambda: Grid<T>,
    risk: Grid<T>,
    total_budget: T,
    tail_param: T,
}

impl<T: Scalar> ProblemInstance<T> {
    /// Validates and builds an instance.
    ///
    /// The budget must strictly exceed the total arrival rate.
    pub fn new(
        categories: Vec<String>,
        boroughs: Vec<String>,
        lambda: Grid<T>,
        risk: Grid<T>,
        total_budget: T,
        tail_param: T,
    ) -> Result<Self, ModelError> {
        let shape = (categories.len(), boroughs.len());
        if shape.0 == 0 || shape.1 == 0 {
            return Err(ModelError::DimensionMismatch(
                "need at least one category and one borough".into(),
            ));
        }
        if lambda.shape() != shape {
            return Err(ModelError::DimensionMismatch(format!(
                "lambda is {:?}, expected {:?}",
                lambda.shape(),
                shape
            )));
        }
        if risk.shape() != shape {
            return Err(ModelError::DimensionMismatch(format!(
                "risk is {:?}, expected {:?}",
                risk.shape(),
                shape
            )));
        }
        for ((k, b), &l) in lambda.iter() {
            if !l.is_finite() {
                return Err(ModelError::NonFinite("lambda"));
            }
            if l < T::zero() {
                return Err(ModelError::NegativeRate { category: k, borough: b });
            }
        }
        for ((k, b), &r) in risk.iter() {
            if !r.is_finite() {
                return Err(ModelError::NonFinite("risk"));
            }
            if r <= T::zero() {
                return Err(ModelError::NonPositiveRisk { category: k, borough: b });
            }
        }
        if !total_budget.is_finite() {
            return Err(ModelError::NonFinite("total budget"));
        }
        if !(tail_param > T::zero()) || !tail_param.is_finite() {
            return Err(ModelError::NonPositiveTail(tail_param.as_f64()));
        }
        let total_rate: T = lambda.as_slice().iter().copied().sum();
        if total_budget <= total_rate {
            return Err(ModelError::NonPositiveSlack {
                budget: total_budget.as_f64(),
                total_rate: total_rate.as_f64(),
            });
        }
        Ok(Self {
            categories,
            boroughs,
            lambda,
            risk,
            total_budget,
            tail_param,
        })
    }

    /// Unnamed instance from row-major (category) matrices; ids are generated.
    pub fn from_rows(
        lambda: Vec<Vec<T>>,
        risk: Vec<Vec<T>>,
        total_budget: T,
        tail_param: T,
    ) -> Result<Self, ModelError> {
        let lambda = Grid::from_rows(lambda)
            .ok_or_else(|| ModelError::DimensionMismatch("ragged lambda rows".into()))?;
        let risk = Grid::from_rows(risk)
            .ok_or_else(|| ModelError::DimensionMismatch("ragged risk rows".into()))?;
        let categories = (0..lambda.categories()).map(|k| format!("k{k}")).collect();
        let boroughs = (0..lambda.boroughs()).map(|b| format!("b{b}")).collect();
        Self::new(categories, boroughs, lambda, risk, total_budget, tail_param)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn boroughs(&self) -> &[String] {
        &self.boroughs
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn n_boroughs(&self) -> usize {
        self.boroughs.len()
    }

    pub fn lambda(&self) -> &Grid<T> {
        &self.lambda
    }

    pub fn risk(&self) -> &Grid<T> {
        &self.risk
    }

    pub fn total_budget(&self) -> T {
        self.total_budget
    }

    pub fn tail_param(&self) -> T {
        self.tail_param
    }

    pub fn total_rate(&self) -> T {
        self.lambda.as_slice().iter().copied().sum()
    }

    /// Capacity in excess of the total arrival rate, `C - Σλ`.
    pub fn slack(&self) -> T {
        self.total_budget - self.total_rate()
    }

    /// Arrival rate of one borough, summed over categories.
    pub fn borough_rate(&self, b: usize) -> T {
        self.lambda.column(b).copied().sum()
    }

    /// Same instance with a different tail parameter.
    pub fn with_tail_param(&self, tail_param: T) -> Result<Self, ModelError> {
        Self::new(
            self.categories.clone(),
            self.boroughs.clone(),
            self.lambda.clone(),
            self.risk.clone(),
            self.total_budget,
            tail_param,
        )
    }
}

/// Tail parameter for a target tail probability: `α = -ln(prob)`.
pub fn tail_param_from_probability<T: Scalar>(prob: T) -> T {
    -prob.ln()
}

/// Optimal SLAs, GPS weights and budgets of the stylized model.
///
/// `z` is `None` for pairs with zero arrival rate: they get no capacity and no SLA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StylizedSolution<T> {
    pub z: Grid<Option<T>>,
    pub phi: Grid<T>,
    pub budgets: Vec<T>,
    pub x: Grid<T>,
    /// Efficiency loss: sum of borough costs.
    pub g: T,
    /// Equity loss: largest borough cost.
    pub f: T,
}

impl<T: Scalar> StylizedSolution<T> {
    /// `γ g + (1 - γ) f`.
    pub fn objective(&self, gamma: T) -> T {
        gamma * self.g + (T::one() - gamma) * self.f
    }
}

/// Weights normalized to sum 1; an all-zero group maps to the uniform distribution.
///
/// Groups that already sum to 1 within rounding are returned unchanged.
pub fn normalize_weights<T: Scalar>(weights: &[T]) -> Vec<T> {
    if weights.is_empty() {
        return Vec::new();
    }
    let total: T = weights.iter().copied().sum();
    if total <= T::zero() {
        return vec![T::one() / T::count(weights.len()); weights.len()];
    }
    let tol = T::epsilon() * T::count(weights.len());
    if (total - T::one()).abs() <= tol {
        return weights.to_vec();
    }
    weights.iter().map(|&w| w / total).collect()
}

fn check_weights<T: Scalar>(values: &[T], offset: usize) -> Result<(), ModelError> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(ModelError::NonFinite("policy weights"));
        }
        if v < T::zero() {
            return Err(ModelError::NegativeEntry { index: offset + i });
        }
    }
    Ok(())
}

fn check_fractions<T: Scalar>(values: &[T], offset: usize) -> Result<(), ModelError> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < T::zero() || v > T::one() {
            return Err(ModelError::FractionOutOfRange { index: offset + i });
        }
    }
    Ok(())
}

/// Per-borough budget fractions plus within-borough GPS weights and target inspection fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoroughBudgetPolicy<T> {
    budget_frac: Vec<T>,
    gps: Grid<T>,
    target_frac: Grid<T>,
}

impl<T: Scalar> BoroughBudgetPolicy<T> {
    /// Builds a policy from (possibly unnormalized) non-negative weights.
    ///
    /// Budget weights are normalized across boroughs and GPS weights within each borough.
    pub fn new(budget: Vec<T>, gps: Grid<T>, target_frac: Grid<T>) -> Result<Self, ModelError> {
        let (k, b) = gps.shape();
        if budget.len() != b || target_frac.shape() != (k, b) {
            return Err(ModelError::DimensionMismatch(format!(
                "budget has {} boroughs, gps is {:?}, targets are {:?}",
                budget.len(),
                gps.shape(),
                target_frac.shape()
            )));
        }
        check_weights(&budget, 0)?;
        check_weights(gps.as_slice(), b)?;
        check_fractions(target_frac.as_slice(), b + k * b)?;
        let budget_frac = normalize_weights(&budget);
        let mut gps_norm = gps.clone();
        for bi in 0..b {
            let column: Vec<T> = gps.column(bi).copied().collect();
            for (ki, w) in normalize_weights(&column).into_iter().enumerate() {
                gps_norm.set(ki, bi, w);
            }
        }
        Ok(Self {
            budget_frac,
            gps: gps_norm,
            target_frac,
        })
    }

    /// Maps a raw search vector onto a feasible policy.
    ///
    /// Layout: `B` budget weights, then `K·B` GPS weights grouped per borough
    /// (borough-major: all categories of borough 0, then borough 1, ...), then
    /// `K·B` inspection fractions in the same order.
    pub fn from_vector(raw: &[T], n_categories: usize, n_boroughs: usize) -> Result<Self, ModelError> {
        let (k, b) = (n_categories, n_boroughs);
        let expected = b + 2 * k * b;
        if raw.len() != expected {
            return Err(ModelError::DimensionMismatch(format!(
                "policy vector has length {}, expected {expected}",
                raw.len()
            )));
        }
        check_weights(&raw[..b + k * b], 0)?;
        check_fractions(&raw[b + k * b..], b + k * b)?;
        let gps = Grid::from_fn(k, b, |ki, bi| raw[b + bi * k + ki]);
        let targets = Grid::from_fn(k, b, |ki, bi| raw[b + k * b + bi * k + ki]);
        Self::new(raw[..b].to_vec(), gps, targets)
    }

    /// Inverse layout of [`Self::from_vector`].
    pub fn to_vector(&self) -> Vec<T> {
        let (k, b) = self.gps.shape();
        let mut out = self.budget_frac.clone();
        for bi in 0..b {
            out.extend((0..k).map(|ki| self.gps.at(ki, bi)));
        }
        for bi in 0..b {
            out.extend((0..k).map(|ki| self.target_frac.at(ki, bi)));
        }
        out
    }

    pub fn vector_len(n_categories: usize, n_boroughs: usize) -> usize {
        n_boroughs + 2 * n_categories * n_boroughs
    }

    pub fn budget_frac(&self) -> &[T] {
        &self.budget_frac
    }

    pub fn gps(&self) -> &Grid<T> {
        &self.gps
    }

    pub fn target_frac(&self) -> &Grid<T> {
        &self.target_frac
    }

    pub fn shape(&self) -> (usize, usize) {
        self.gps.shape()
    }

    pub fn cast<U: Scalar>(&self) -> BoroughBudgetPolicy<U> {
        BoroughBudgetPolicy {
            budget_frac: self.budget_frac.iter().map(|v| U::of(v.as_f64())).collect(),
            gps: self.gps.map(|v| U::of(v.as_f64())),
            target_frac: self.target_frac.map(|v| U::of(v.as_f64())),
        }
    }
}

/// One centralized server over all (category, borough) queues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityBudgetPolicy<T> {
    gps: Grid<T>,
    target_frac: Grid<T>,
}

impl<T: Scalar> CityBudgetPolicy<T> {
    /// GPS weights are normalized over all pairs.
    pub fn new(gps: Grid<T>, target_frac: Grid<T>) -> Result<Self, ModelError> {
        if gps.shape() != target_frac.shape() {
            return Err(ModelError::DimensionMismatch(format!(
                "gps is {:?}, targets are {:?}",
                gps.shape(),
                target_frac.shape()
            )));
        }
        check_weights(gps.as_slice(), 0)?;
        check_fractions(target_frac.as_slice(), gps.as_slice().len())?;
        let (k, b) = gps.shape();
        let gps = Grid::from_vec(k, b, normalize_weights(gps.as_slice())).expect("same shape");
        Ok(Self { gps, target_frac })
    }

    /// Layout: `K·B` GPS weights then `K·B` fractions, both borough-major.
    pub fn from_vector(raw: &[T], n_categories: usize, n_boroughs: usize) -> Result<Self, ModelError> {
        let (k, b) = (n_categories, n_boroughs);
        if raw.len() != 2 * k * b {
            return Err(ModelError::DimensionMismatch(format!(
                "policy vector has length {}, expected {}",
                raw.len(),
                2 * k * b
            )));
        }
        check_weights(&raw[..k * b], 0)?;
        check_fractions(&raw[k * b..], k * b)?;
        let gps = Grid::from_fn(k, b, |ki, bi| raw[bi * k + ki]);
        let targets = Grid::from_fn(k, b, |ki, bi| raw[k * b + bi * k + ki]);
        Self::new(gps, targets)
    }

    pub fn to_vector(&self) -> Vec<T> {
        let (k, b) = self.gps.shape();
        let mut out = Vec::with_capacity(2 * k * b);
        for grid in [&self.gps, &self.target_frac] {
            for bi in 0..b {
                out.extend((0..k).map(|ki| grid.at(ki, bi)));
            }
        }
        out
    }

    pub fn gps(&self) -> &Grid<T> {
        &self.gps
    }

    pub fn target_frac(&self) -> &Grid<T> {
        &self.target_frac
    }

    pub fn shape(&self) -> (usize, usize) {
        self.gps.shape()
    }

    pub fn cast<U: Scalar>(&self) -> CityBudgetPolicy<U> {
        CityBudgetPolicy {
            gps: self.gps.map(|v| U::of(v.as_f64())),
            target_frac: self.target_frac.map(|v| U::of(v.as_f64())),
        }
    }
}

/// One reported incident.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentRecord {
    /// Zero-based day index within the trace.
    pub day: u32,
    pub category: usize,
    pub borough: usize,
    /// Index into [`ArrivalTrace::regions`].
    pub region: Option<u32>,
}

/// Daily incident counts per (category, borough), optionally backed by incident records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalTrace {
    categories: Vec<String>,
    boroughs: Vec<String>,
    horizon: usize,
    /// Day-major then category then borough.
    counts: Vec<u32>,
    records: Option<Vec<IncidentRecord>>,
    regions: Vec<String>,
}

impl ArrivalTrace {
    /// `counts[t]` is the day-`t` count grid.
    pub fn from_counts(
        categories: Vec<String>,
        boroughs: Vec<String>,
        counts: Vec<Grid<u32>>,
    ) -> Result<Self, ModelError> {
        if counts.is_empty() {
            return Err(ModelError::EmptyHorizon);
        }
        let shape = (categories.len(), boroughs.len());
        if let Some(bad) = counts.iter().position(|g| g.shape() != shape) {
            return Err(ModelError::DimensionMismatch(format!(
                "day {bad} counts are {:?}, expected {shape:?}",
                counts[bad].shape()
            )));
        }
        let horizon = counts.len();
        Ok(Self {
            categories,
            boroughs,
            horizon,
            counts: counts.into_iter().flat_map(|g| g.as_slice().to_vec()).collect(),
            records: None,
            regions: Vec::new(),
        })
    }

    /// Builds the trace from incident records; counts are derived. Records are
    /// stably sorted by day.
    pub fn from_records(
        categories: Vec<String>,
        boroughs: Vec<String>,
        horizon: usize,
        mut records: Vec<IncidentRecord>,
        regions: Vec<String>,
    ) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::EmptyHorizon);
        }
        let (nk, nb) = (categories.len(), boroughs.len());
        let mut counts = vec![0u32; horizon * nk * nb];
        for (i, r) in records.iter().enumerate() {
            let bad = |reason: &str| ModelError::BadRecord {
                index: i,
                reason: reason.to_string(),
            };
            if r.day as usize >= horizon {
                return Err(bad("day beyond horizon"));
            }
            if r.category >= nk || r.borough >= nb {
                return Err(bad("category or borough out of range"));
            }
            if r.region.is_some_and(|g| g as usize >= regions.len()) {
                return Err(bad("unknown region"));
            }
            counts[(r.day as usize * nk + r.category) * nb + r.borough] += 1;
        }
        records.sort_by_key(|r| r.day);
        Ok(Self {
            categories,
            boroughs,
            horizon,
            counts,
            records: Some(records),
            regions,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn boroughs(&self) -> &[String] {
        &self.boroughs
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.categories.len(), self.boroughs.len())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn count(&self, day: usize, k: usize, b: usize) -> u32 {
        let (nk, nb) = self.shape();
        self.counts[(day * nk + k) * nb + b]
    }

    pub fn day(&self, day: usize) -> Grid<u32> {
        let (nk, nb) = self.shape();
        let start = day * nk * nb;
        Grid::from_vec(nk, nb, self.counts[start..start + nk * nb].to_vec()).expect("shape")
    }

    /// Total arrivals per pair over the horizon.
    pub fn totals(&self) -> Grid<u64> {
        let (nk, nb) = self.shape();
        Grid::from_fn(nk, nb, |k, b| {
            (0..self.horizon).map(|t| u64::from(self.count(t, k, b))).sum()
        })
    }

    pub fn records(&self) -> Option<&[IncidentRecord]> {
        self.records.as_deref()
    }

    /// Incidents in day order; synthesized from counts (category then borough
    /// order within a day, no region) when no records were supplied.
    pub fn incidents(&self) -> Vec<IncidentRecord> {
        if let Some(records) = &self.records {
            return records.clone();
        }
        let (nk, nb) = self.shape();
        let mut out = Vec::new();
        for t in 0..self.horizon {
            for k in 0..nk {
                for b in 0..nb {
                    let n = self.count(t, k, b);
                    out.extend((0..n).map(|_| IncidentRecord {
                        day: t as u32,
                        category: k,
                        borough: b,
                        region: None,
                    }));
                }
            }
        }
        out
    }

    /// Days `[start, end)` of the trace.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, ModelError> {
        if start >= end || end > self.horizon {
            return Err(ModelError::EmptyHorizon);
        }
        let (nk, nb) = self.shape();
        let counts = self.counts[start * nk * nb..end * nk * nb].to_vec();
        let records = self.records.as_ref().map(|rs| {
            rs.iter()
                .filter(|r| (start..end).contains(&(r.day as usize)))
                .map(|r| IncidentRecord {
                    day: r.day - start as u32,
                    ..*r
                })
                .collect()
        });
        Ok(Self {
            categories: self.categories.clone(),
            boroughs: self.boroughs.clone(),
            horizon: end - start,
            counts,
            records,
            regions: self.regions.clone(),
        })
    }
}

/// City-wide inspections performed per day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityTrace {
    capacity: Vec<u32>,
}

impl CapacityTrace {
    pub fn new(capacity: Vec<u32>) -> Result<Self, ModelError> {
        if capacity.is_empty() {
            return Err(ModelError::EmptyHorizon);
        }
        Ok(Self { capacity })
    }

    pub fn horizon(&self) -> usize {
        self.capacity.len()
    }

    pub fn daily(&self) -> &[u32] {
        &self.capacity
    }

    pub fn total(&self) -> u64 {
        self.capacity.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn slice(&self, start: usize, end: usize) -> Result<Self, ModelError> {
        if start >= end || end > self.capacity.len() {
            return Err(ModelError::EmptyHorizon);
        }
        Self::new(self.capacity[start..end].to_vec())
    }
}
