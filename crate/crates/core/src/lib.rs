//! Service-level-agreement design for city incident response.
//!
//! Two halves share one set of domain types:
//!
//! * [`stylized`] solves the convex budget / GPS-weight / SLA design problem of a
//!   Poisson queuing network analytically, for any efficiency-equity weighting.
//! * [`sim`], [`metrics`] and [`search`] replay incident traces under candidate
//!   policies, score them on empirical efficiency and equity losses, and search
//!   the policy space for a Pareto front.
//!
//! Analytical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the simulator and search use.

pub mod grid;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod search;
pub mod sim;
pub mod stylized;

pub use grid::Grid;
pub use model::{
    ArrivalTrace, BoroughBudgetPolicy, CapacityTrace, CityBudgetPolicy, IncidentRecord, ModelError,
    ProblemInstance, StylizedSolution,
};
pub use scalar::Scalar;
pub use search::Policy;

pub type Instance = ProblemInstance<f64>;
pub type Instance32 = ProblemInstance<f32>;
pub type Solution = StylizedSolution<f64>;
pub type Solution32 = StylizedSolution<f32>;
pub type BoroughPolicy = BoroughBudgetPolicy<f64>;
pub type CityPolicy = CityBudgetPolicy<f64>;
pub type Metrics = metrics::PolicyMetrics<f64>;
