//! Analytical SLA design for the stylized GPS queuing model.
//!
//! Decision variables are the capacity slacks `x[k][b] = C_b φ[k][b] - λ[k][b]`;
//! SLAs follow as `z = α / x`. With the risk-weighted borough cost
//! `Cost_b = Σ_k λ r z`, the problem in `x` is convex. Within a borough the
//! optimal slack split is always `x ∝ √(λ r)` because both losses are
//! non-decreasing in every borough cost, so the remaining problem is over the
//! borough slack totals `X_b` only, where `Cost_b = α A_b / X_b` with
//! `A_b = (Σ_k √(λ r))²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::model::{ProblemInstance, StylizedSolution};
use crate::scalar::Scalar;

/// Iteration cap for the weighted solver.
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StylizedError {
    #[error("SLA at (category {category}, borough {borough}) must be positive")]
    NonPositiveSla { category: usize, borough: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("every arrival-rate × risk product is zero")]
    AllRatesZero,
    #[error("borough {0} has no category with positive arrival rate; equal-cost allocation is undefined")]
    BoroughWithNoRisk(usize),
    #[error("solver did not converge within {0} iterations")]
    DidNotConverge(usize),
    #[error("expected 1 category and 2 boroughs, got {categories} × {boroughs}")]
    WrongDimensions { categories: usize, boroughs: usize },
    #[error("gamma must lie in [0, 1], got {0}")]
    InvalidGamma(f64),
}

/// Relative weight of efficiency in `L_γ = γ g + (1 - γ) f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedObjectiveConfig<T> {
    gamma: T,
}

impl<T: Scalar> WeightedObjectiveConfig<T> {
    pub fn new(gamma: T) -> Result<Self, StylizedError> {
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(StylizedError::InvalidGamma(gamma.as_f64()));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }
}

/// Per-borough risk-weighted SLA costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoroughCosts<T>(pub Vec<T>);

impl<T: Scalar> BoroughCosts<T> {
    /// Efficiency loss `g`.
    pub fn total(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Equity loss `f`.
    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// `Cost_b(z) = Σ_k λ r z` for every borough.
pub fn borough_cost<T: Scalar>(
    instance: &ProblemInstance<T>,
    z: &Grid<T>,
) -> Result<BoroughCosts<T>, StylizedError> {
    let (nk, nb) = (instance.n_categories(), instance.n_boroughs());
    if z.shape() != (nk, nb) {
        return Err(StylizedError::DimensionMismatch(format!(
            "z is {:?}, instance is {:?}",
            z.shape(),
            (nk, nb)
        )));
    }
    if let Some(((k, b), _)) = z.iter().find(|(_, &v)| !(v > T::zero())) {
        return Err(StylizedError::NonPositiveSla { category: k, borough: b });
    }
    let costs = (0..nb)
        .map(|b| {
            (0..nk)
                .map(|k| instance.lambda().at(k, b) * instance.risk().at(k, b) * z.at(k, b))
                .sum()
        })
        .collect();
    Ok(BoroughCosts(costs))
}

/// Costs of a solution whose zero-rate pairs carry no SLA.
fn solution_costs<T: Scalar>(instance: &ProblemInstance<T>, z: &Grid<Option<T>>) -> BoroughCosts<T> {
    let (nk, nb) = (instance.n_categories(), instance.n_boroughs());
    BoroughCosts(
        (0..nb)
            .map(|b| {
                (0..nk)
                    .filter_map(|k| {
                        z.at(k, b)
                            .map(|zk| instance.lambda().at(k, b) * instance.risk().at(k, b) * zk)
                    })
                    .sum()
            })
            .collect(),
    )
}

/// `√(λ r)` per pair and their per-borough sums.
struct RiskWeights<T> {
    sqrt_lr: Grid<T>,
    borough_sum: Vec<T>,
}

impl<T: Scalar> RiskWeights<T> {
    fn of(instance: &ProblemInstance<T>) -> Self {
        let lambda = instance.lambda();
        let risk = instance.risk();
        let sqrt_lr = Grid::from_fn(instance.n_categories(), instance.n_boroughs(), |k, b| {
            (lambda.at(k, b) * risk.at(k, b)).sqrt()
        });
        let borough_sum = (0..instance.n_boroughs())
            .map(|b| sqrt_lr.column(b).copied().sum())
            .collect();
        Self { sqrt_lr, borough_sum }
    }

    /// `A_b = (Σ_k √(λ r))²`.
    fn borough_weight(&self, b: usize) -> T {
        self.borough_sum[b] * self.borough_sum[b]
    }

    fn total(&self) -> T {
        self.borough_sum.iter().copied().sum()
    }
}

/// Expands borough slack totals into the full solution.
fn assemble<T: Scalar>(
    instance: &ProblemInstance<T>,
    weights: &RiskWeights<T>,
    slack_per_borough: &[T],
) -> StylizedSolution<T> {
    let (nk, nb) = (instance.n_categories(), instance.n_boroughs());
    let alpha = instance.tail_param();
    let x = Grid::from_fn(nk, nb, |k, b| {
        let s = weights.borough_sum[b];
        if s > T::zero() {
            slack_per_borough[b] * weights.sqrt_lr.at(k, b) / s
        } else {
            T::zero()
        }
    });
    let z = x.map(|&v| (v > T::zero()).then(|| alpha / v));
    let budgets: Vec<T> = (0..nb)
        .map(|b| (0..nk).map(|k| x.at(k, b) + instance.lambda().at(k, b)).sum())
        .collect();
    let phi = Grid::from_fn(nk, nb, |k, b| {
        if budgets[b] > T::zero() && x.at(k, b) > T::zero() {
            (x.at(k, b) + instance.lambda().at(k, b)) / budgets[b]
        } else {
            T::zero()
        }
    });
    let costs = solution_costs(instance, &z);
    StylizedSolution {
        z,
        phi,
        budgets,
        x,
        g: costs.total(),
        f: costs.max(),
    }
}

/// Most efficient solution (`γ = 1`): `x ∝ √(λ r)` over all pairs.
pub fn solve_extreme_efficiency<T: Scalar>(
    instance: &ProblemInstance<T>,
) -> Result<StylizedSolution<T>, StylizedError> {
    let weights = RiskWeights::of(instance);
    let total = weights.total();
    if !(total > T::zero()) {
        return Err(StylizedError::AllRatesZero);
    }
    let slack = instance.slack();
    let per_borough: Vec<T> = weights
        .borough_sum
        .iter()
        .map(|&s| slack * s / total)
        .collect();
    Ok(assemble(instance, &weights, &per_borough))
}

/// Most equitable solution (`γ = 0`): every borough bears the same cost.
pub fn solve_extreme_equity<T: Scalar>(
    instance: &ProblemInstance<T>,
) -> Result<StylizedSolution<T>, StylizedError> {
    let weights = RiskWeights::of(instance);
    if !(weights.total() > T::zero()) {
        return Err(StylizedError::AllRatesZero);
    }
    if let Some(b) = weights.borough_sum.iter().position(|&s| !(s > T::zero())) {
        return Err(StylizedError::BoroughWithNoRisk(b));
    }
    let a: Vec<T> = (0..instance.n_boroughs()).map(|b| weights.borough_weight(b)).collect();
    let a_total: T = a.iter().copied().sum();
    let slack = instance.slack();
    let per_borough: Vec<T> = a.iter().map(|&ab| slack * ab / a_total).collect();
    Ok(assemble(instance, &weights, &per_borough))
}

/// Reduced borough-level problem `min γ Σ A_b/X_b + (1-γ) max_b A_b/X_b` s.t. `Σ X_b = S`.
struct BoroughProblem<T> {
    /// `√A_b`, only boroughs with positive weight.
    root: Vec<T>,
    /// Borough index of each entry in `root`.
    index: Vec<usize>,
    slack: T,
    gamma: T,
}

impl<T: Scalar> BoroughProblem<T> {
    fn weight(&self, i: usize) -> T {
        self.root[i] * self.root[i]
    }

    /// Smallest feasible epigraph level: all boroughs at equal cost.
    fn level_min(&self) -> T {
        (0..self.root.len()).map(|i| self.weight(i)).sum::<T>() / self.slack
    }

    /// Largest level that can bind: the max cost of the efficiency allocation.
    fn level_max(&self) -> T {
        let total: T = self.root.iter().copied().sum();
        self.root.iter().copied().fold(T::zero(), T::max) * total / self.slack
    }

    /// Minimizes `Σ A_b/X_b` subject to `A_b/X_b ≤ level` and `Σ X = S`.
    ///
    /// Returns the allocation and the scale `c` of the unconstrained part
    /// (`X_b = c √A_b`), or `None` when every borough sits on its bound.
    fn water_fill(&self, level: T) -> (Vec<T>, Option<T>) {
        let n = self.root.len();
        let floors: Vec<T> = (0..n).map(|i| self.weight(i) / level).collect();
        // Borough i is unconstrained once c exceeds root_i / level, so small
        // roots leave their floor first.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.root[a].partial_cmp(&self.root[b]).expect("finite"));
        let mut floor_rest: T = floors.iter().copied().sum();
        let mut root_free = T::zero();
        let mut scale = None;
        for (j, &i) in order.iter().enumerate() {
            floor_rest = floor_rest - floors[i];
            root_free = root_free + self.root[i];
            let c = (self.slack - floor_rest) / root_free;
            let next_break = order
                .get(j + 1)
                .map(|&nx| self.root[nx] / level)
                .unwrap_or_else(T::infinity);
            if c <= next_break {
                scale = Some(c);
                break;
            }
        }
        match scale {
            Some(c) if c > T::zero() => {
                let alloc = (0..n).map(|i| floors[i].max(c * self.root[i])).collect();
                (alloc, Some(c))
            }
            _ => (floors, None),
        }
    }

    /// Derivative of the partially minimized objective with respect to the level.
    fn level_derivative(&self, level: T) -> T {
        let one = T::one();
        let (alloc, scale) = self.water_fill(level);
        let Some(c) = scale else {
            return T::neg_infinity();
        };
        let mut pressure = T::zero();
        for (i, &xb) in alloc.iter().enumerate() {
            let unconstrained = c * self.root[i];
            if xb > unconstrained {
                let ratio = self.root[i] / (c * level);
                pressure = pressure + (ratio * ratio - one);
            }
        }
        (one - self.gamma) - self.gamma * pressure
    }

    fn solve(&self) -> Result<Vec<T>, StylizedError> {
        let mut lo = self.level_min();
        let mut hi = self.level_max();
        if !(hi > lo) {
            return Ok(self.water_fill(lo).0);
        }
        let tol = T::epsilon() * T::of(4.0);
        let mut iterations = 0;
        while hi - lo > tol * hi {
            if iterations >= MAX_ITERATIONS {
                return Err(StylizedError::DidNotConverge(iterations));
            }
            iterations += 1;
            let mid = lo + (hi - lo) / T::of(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let d = self.level_derivative(mid);
            if d.is_nan() {
                return Err(StylizedError::DidNotConverge(iterations));
            }
            if d > T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let level = lo + (hi - lo) / T::of(2.0);
        Ok(self.water_fill(level).0)
    }
}

/// Optimal solution of `min γ g + (1 - γ) f` for any `γ ∈ [0, 1]`.
///
/// Boroughs without risk receive no slack.
pub fn solve_weighted<T: Scalar>(
    instance: &ProblemInstance<T>,
    config: WeightedObjectiveConfig<T>,
) -> Result<StylizedSolution<T>, StylizedError> {
    let weights = RiskWeights::of(instance);
    if !(weights.total() > T::zero()) {
        return Err(StylizedError::AllRatesZero);
    }
    let index: Vec<usize> = (0..instance.n_boroughs())
        .filter(|&b| weights.borough_sum[b] > T::zero())
        .collect();
    let problem = BoroughProblem {
        root: index.iter().map(|&b| weights.borough_sum[b]).collect(),
        index,
        slack: instance.slack(),
        gamma: config.gamma(),
    };
    let alloc = problem.solve()?;
    let mut per_borough = vec![T::zero(); instance.n_boroughs()];
    for (i, &b) in problem.index.iter().enumerate() {
        per_borough[b] = alloc[i];
    }
    Ok(assemble(instance, &weights, &per_borough))
}

/// First-order optimality residual of a solution for `min γ g + (1 - γ) f`.
///
/// Checks the within-borough `x ∝ √(λ r)` split and the borough-level
/// stationarity conditions (equal marginal value of slack, non-negative
/// multipliers on the max-cost boroughs), each relative.
pub fn kkt_residual<T: Scalar>(instance: &ProblemInstance<T>, solution: &StylizedSolution<T>, gamma: T) -> T {
    let weights = RiskWeights::of(instance);
    let (nk, nb) = (instance.n_categories(), instance.n_boroughs());
    let mut residual = T::zero();
    let mut totals = vec![T::zero(); nb];
    for b in 0..nb {
        totals[b] = solution.x.column(b).copied().sum();
        let s = weights.borough_sum[b];
        if s > T::zero() && totals[b] > T::zero() {
            for k in 0..nk {
                let w = weights.sqrt_lr.at(k, b);
                if w > T::zero() {
                    let r = (solution.x.at(k, b) * s / (w * totals[b]) - T::one()).abs();
                    residual = residual.max(r);
                }
            }
        }
    }
    let slack = instance.slack();
    let used: T = totals.iter().copied().sum();
    residual = residual.max((used - slack).abs() / slack);

    let active: Vec<usize> = (0..nb).filter(|&b| weights.borough_sum[b] > T::zero()).collect();
    if active.iter().any(|&b| !(totals[b] > T::zero())) {
        return T::infinity();
    }
    let cost = |b: usize| weights.borough_weight(b) / totals[b];
    let marginal = |b: usize| weights.borough_weight(b) / (totals[b] * totals[b]);
    let top = active.iter().map(|&b| cost(b)).fold(T::zero(), T::max);
    let near = T::of(1e-7);
    let at_max: Vec<usize> = active.iter().copied().filter(|&b| cost(b) >= top * (T::one() - near)).collect();
    let inv_sum: T = at_max.iter().map(|&b| T::one() / marginal(b)).sum();
    let nu = (T::one() - gamma + gamma * T::count(at_max.len())) / inv_sum;
    for &b in &active {
        let q = gamma * marginal(b);
        let r = if at_max.contains(&b) {
            (q - nu).max(T::zero()) / nu
        } else {
            (q - nu).abs() / nu
        };
        residual = residual.max(r);
    }
    residual
}

fn two_by_one<T: Scalar>(instance: &ProblemInstance<T>) -> Result<(T, T, T), StylizedError> {
    let (nk, nb) = (instance.n_categories(), instance.n_boroughs());
    if nk != 1 || nb != 2 {
        return Err(StylizedError::WrongDimensions { categories: nk, boroughs: nb });
    }
    let lr = |b| instance.lambda().at(0, b) * instance.risk().at(0, b);
    Ok((lr(0).sqrt(), lr(1).sqrt(), instance.slack()))
}

/// Efficiency lost by the most equitable solution relative to the most efficient one
/// (one category, two boroughs).
pub fn price_of_equity<T: Scalar>(instance: &ProblemInstance<T>) -> Result<T, StylizedError> {
    let (s1, s2, slack) = two_by_one(instance)?;
    let d = s1 - s2;
    Ok(instance.tail_param() * d * d / slack)
}

/// Equity lost by the most efficient solution relative to the most equitable one
/// (one category, two boroughs).
pub fn price_of_efficiency<T: Scalar>(instance: &ProblemInstance<T>) -> Result<T, StylizedError> {
    let (s1, s2, slack) = two_by_one(instance)?;
    let (hi, lo) = if s1 >= s2 { (s1, s2) } else { (s2, s1) };
    Ok(instance.tail_param() * lo * (hi - lo) / slack)
}

/// Constraint violations of a candidate solution, plus recomputed losses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    /// `max |x z - α|` over pairs with an SLA.
    pub sla_tightness: T,
    /// `max (Σ_k φ - 1)^+` over boroughs.
    pub gps_sum: T,
    /// `(Σ_b C_b - C)^+`.
    pub budget_sum: T,
    /// `max (Σ_k x - (C_b - Σ_k λ))^+` over boroughs.
    pub slack_balance: T,
    /// Largest negative part among `x`, `φ`, `C_b`, and `z`.
    pub positivity: T,
    pub g: T,
    pub f: T,
}

impl<T: Scalar> ResidualReport<T> {
    pub fn max_violation(&self) -> T {
        [
            self.sla_tightness,
            self.gps_sum,
            self.budget_sum,
            self.slack_balance,
            self.positivity,
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }
}

pub fn verify_solution<T: Scalar>(
    instance: &ProblemInstance<T>,
    solution: &StylizedSolution<T>,
) -> Result<ResidualReport<T>, StylizedError> {
    let shape = (instance.n_categories(), instance.n_boroughs());
    if solution.z.shape() != shape
        || solution.x.shape() != shape
        || solution.phi.shape() != shape
        || solution.budgets.len() != shape.1
    {
        return Err(StylizedError::DimensionMismatch("solution does not match instance".into()));
    }
    let (nk, nb) = shape;
    let alpha = instance.tail_param();
    let zero = T::zero();
    let mut sla = zero;
    let mut positivity = zero;
    for ((k, b), z) in solution.z.iter() {
        let x = solution.x.at(k, b);
        positivity = positivity.max(-x).max(-solution.phi.at(k, b));
        if let Some(z) = *z {
            sla = sla.max((x * z - alpha).abs());
            positivity = positivity.max(-z);
        }
    }
    let mut gps = zero;
    let mut balance = zero;
    for b in 0..nb {
        let phi_sum: T = solution.phi.column(b).copied().sum();
        gps = gps.max(phi_sum - T::one());
        let x_sum: T = solution.x.column(b).copied().sum();
        balance = balance.max(x_sum - (solution.budgets[b] - instance.borough_rate(b)));
        positivity = positivity.max(-solution.budgets[b]);
    }
    let budget_total: T = solution.budgets.iter().copied().sum();
    let costs = solution_costs(instance, &solution.z);
    let _ = nk;
    Ok(ResidualReport {
        sla_tightness: sla,
        gps_sum: gps.max(zero),
        budget_sum: (budget_total - instance.total_budget()).max(zero),
        slack_balance: balance.max(zero),
        positivity,
        g: costs.total(),
        f: costs.max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_borough() -> ProblemInstance<f64> {
        ProblemInstance::from_rows(vec![vec![1.0], vec![4.0]], vec![vec![1.0], vec![1.0]], 7.0, 1.0).unwrap()
    }

    fn two_boroughs() -> ProblemInstance<f64> {
        ProblemInstance::from_rows(vec![vec![1.0, 1.0]], vec![vec![4.0, 1.0]], 4.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn cost_by_hand() {
        let inst = one_borough();
        let z = Grid::from_rows(vec![vec![1.5], vec![0.75]]).unwrap();
        let c = borough_cost(&inst, &z).unwrap();
        assert_eq!(c.0, vec![4.5]);
        assert_eq!(c.total(), 4.5);
    }

    #[test]
    fn zero_rate_category_costs_nothing() {
        let inst = ProblemInstance::from_rows(vec![vec![0.0], vec![1.0]], vec![vec![1.0], vec![1.0]], 2.0, 1.0).unwrap();
        let z = Grid::from_rows(vec![vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(borough_cost(&inst, &z).unwrap().0, vec![1.0]);
    }

    #[test]
    fn cost_is_linear_in_z() {
        let inst = two_boroughs();
        let z = Grid::from_rows(vec![vec![0.3, 0.9]]).unwrap();
        let base = borough_cost(&inst, &z).unwrap();
        let scaled = borough_cost(&inst, &z.map(|v| v * 3.0)).unwrap();
        for (a, b) in base.0.iter().zip(&scaled.0) {
            assert!(close(3.0 * a, *b, 1e-15));
        }
    }

    #[test]
    fn nonpositive_sla_rejected() {
        let inst = two_boroughs();
        let z = Grid::from_rows(vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(
            borough_cost(&inst, &z).unwrap_err(),
            StylizedError::NonPositiveSla { category: 0, borough: 0 }
        );
    }

    #[test]
    fn efficiency_single_borough() {
        let sol = solve_extreme_efficiency(&one_borough()).unwrap();
        assert!(close(sol.x.at(0, 0), 2.0 / 3.0, 1e-14));
        assert!(close(sol.x.at(1, 0), 4.0 / 3.0, 1e-14));
        assert!(close(sol.z.at(0, 0).unwrap(), 1.5, 1e-14));
        assert!(close(sol.z.at(1, 0).unwrap(), 0.75, 1e-14));
        assert!(close(sol.g, 4.5, 1e-14));
    }

    #[test]
    fn efficiency_single_queue_takes_all_slack() {
        let inst = ProblemInstance::from_rows(vec![vec![1.0]], vec![vec![1.0]], 2.0, 1.0).unwrap();
        let sol = solve_extreme_efficiency(&inst).unwrap();
        assert_eq!(sol.x.at(0, 0), 1.0);
        assert_eq!(sol.z.at(0, 0), Some(1.0));
        assert_eq!(sol.phi.at(0, 0), 1.0);
        assert_eq!(sol.budgets, vec![2.0]);
    }

    #[test]
    fn zero_rate_pair_excluded() {
        let inst = ProblemInstance::from_rows(vec![vec![0.0, 1.0]], vec![vec![3.0, 1.0]], 3.0, 1.0).unwrap();
        let sol = solve_extreme_efficiency(&inst).unwrap();
        assert_eq!(sol.z.at(0, 0), None);
        assert_eq!(sol.x.at(0, 0), 0.0);
        assert_eq!(sol.phi.at(0, 0), 0.0);
        assert_eq!(sol.budgets[0], 0.0);
        assert_eq!(
            solve_extreme_equity(&inst).unwrap_err(),
            StylizedError::BoroughWithNoRisk(0)
        );
    }

    #[test]
    fn all_rates_zero_rejected() {
        let inst = ProblemInstance::from_rows(vec![vec![0.0]], vec![vec![1.0]], 1.0, 1.0).unwrap();
        assert_eq!(solve_extreme_efficiency(&inst).unwrap_err(), StylizedError::AllRatesZero);
        let cfg = WeightedObjectiveConfig::new(0.5).unwrap();
        assert_eq!(solve_weighted(&inst, cfg).unwrap_err(), StylizedError::AllRatesZero);
    }

    #[test]
    fn equity_two_boroughs() {
        let sol = solve_extreme_equity(&two_boroughs()).unwrap();
        assert!(close(sol.x.at(0, 0), 1.6, 1e-14));
        assert!(close(sol.x.at(0, 1), 0.4, 1e-14));
        assert!(close(sol.z.at(0, 0).unwrap(), 0.625, 1e-14));
        assert!(close(sol.z.at(0, 1).unwrap(), 2.5, 1e-14));
        assert!(close(sol.f, 2.5, 1e-14));
        assert!(close(sol.g, 5.0, 1e-14));
    }

    #[test]
    fn equity_symmetric_boroughs_match() {
        let inst = ProblemInstance::from_rows(
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![vec![3.0, 3.0], vec![5.0, 5.0]],
            9.0,
            1.0,
        )
        .unwrap();
        let sol = solve_extreme_equity(&inst).unwrap();
        assert!(close(sol.budgets[0], sol.budgets[1], 1e-14));
        for k in 0..2 {
            assert!(close(sol.z.at(k, 0).unwrap(), sol.z.at(k, 1).unwrap(), 1e-14));
        }
    }

    #[test]
    fn weighted_half_matches_line_search() {
        let cfg = WeightedObjectiveConfig::new(0.5).unwrap();
        let sol = solve_weighted(&two_boroughs(), cfg).unwrap();
        let x1 = sol.x.at(0, 0);
        assert!((x1 - 1.4776).abs() < 1e-4, "x1 = {x1}");
        assert!((sol.objective(0.5) - 3.664).abs() < 1e-3);
        assert!(kkt_residual(&two_boroughs(), &sol, 0.5) < 1e-6);
    }

    #[test]
    fn weighted_endpoints_match_closed_forms() {
        let inst = two_boroughs();
        let ef = solve_extreme_efficiency(&inst).unwrap();
        let eq = solve_extreme_equity(&inst).unwrap();
        let w1 = solve_weighted(&inst, WeightedObjectiveConfig::new(1.0).unwrap()).unwrap();
        let w0 = solve_weighted(&inst, WeightedObjectiveConfig::new(0.0).unwrap()).unwrap();
        assert!(close(w1.g, ef.g, 1e-9));
        assert!(close(w0.f, eq.f, 1e-9));
    }

    #[test]
    fn weighted_on_f32() {
        let inst = ProblemInstance::<f32>::from_rows(vec![vec![1.0, 1.0]], vec![vec![4.0, 1.0]], 4.0, 1.0).unwrap();
        let sol = solve_weighted(&inst, WeightedObjectiveConfig::new(0.5f32).unwrap()).unwrap();
        assert!((sol.x.at(0, 0) - 1.4776).abs() < 1e-3);
    }

    #[test]
    fn invalid_gamma() {
        assert!(WeightedObjectiveConfig::new(1.5).is_err());
        assert!(WeightedObjectiveConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn prices_on_worked_instance() {
        let inst = two_boroughs();
        assert!(close(price_of_equity(&inst).unwrap(), 0.5, 1e-15));
        assert!(close(price_of_efficiency(&inst).unwrap(), 0.5, 1e-15));
        let doubled = inst.with_tail_param(2.0).unwrap();
        assert!(close(price_of_equity(&doubled).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn prices_vanish_for_equal_boroughs() {
        let inst = ProblemInstance::from_rows(vec![vec![2.0, 1.0]], vec![vec![1.0, 2.0]], 5.0, 1.0).unwrap();
        assert_eq!(price_of_equity(&inst).unwrap(), 0.0);
        assert_eq!(price_of_efficiency(&inst).unwrap(), 0.0);
    }

    #[test]
    fn price_of_efficiency_symmetric() {
        let a = ProblemInstance::from_rows(vec![vec![1.0, 2.0]], vec![vec![4.0, 1.0]], 6.0, 1.0).unwrap();
        let b = ProblemInstance::from_rows(vec![vec![2.0, 1.0]], vec![vec![1.0, 4.0]], 6.0, 1.0).unwrap();
        assert_eq!(price_of_efficiency(&a).unwrap(), price_of_efficiency(&b).unwrap());
    }

    #[test]
    fn prices_need_two_by_one() {
        assert_eq!(
            price_of_equity(&one_borough()).unwrap_err(),
            StylizedError::WrongDimensions { categories: 2, boroughs: 1 }
        );
    }

    #[test]
    fn verify_reports_clean_and_broken() {
        let inst = one_borough();
        let sol = solve_extreme_efficiency(&inst).unwrap();
        let rep = verify_solution(&inst, &sol).unwrap();
        assert!(rep.max_violation() <= 1e-9);
        assert!(close(rep.g, 4.5, 1e-14));

        let mut halved = sol.clone();
        halved.z = sol.z.map(|z| z.map(|v| v / 2.0));
        let rep = verify_solution(&inst, &halved).unwrap();
        assert!(close(rep.sla_tightness, 0.5, 1e-12));
    }
}
