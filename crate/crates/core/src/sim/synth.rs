use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::SimError;
use crate::grid::Grid;
use crate::model::{ArrivalTrace, CapacityTrace, ProblemInstance};
use crate::scalar::Scalar;

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u32
}

/// Synthetic traces with Poisson daily arrivals per pair and Poisson daily
/// capacity of mean `C · utilization`.
///
/// Draw order per day: pairs in category-major order, then capacity.
pub fn generate_synthetic_trace<T: Scalar>(
    instance: &ProblemInstance<T>,
    days: usize,
    utilization: f64,
    seed: u64,
) -> Result<(ArrivalTrace, CapacityTrace), SimError> {
    if days == 0 {
        return Err(SimError::InvalidConfig("synthetic trace needs at least one day".into()));
    }
    if !(utilization > 0.0 && utilization <= 1.0) {
        return Err(SimError::InvalidConfig("utilization must lie in (0, 1]".into()));
    }
    let (nk, nb) = (instance.n_categories(), instance.n_boroughs());
    let lambda = instance.lambda().map(|v| v.as_f64());
    let cap_mean = instance.total_budget().as_f64() * utilization;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(days);
    let mut capacity = Vec::with_capacity(days);
    for _ in 0..days {
        counts.push(Grid::from_fn(nk, nb, |k, b| poisson(&mut rng, lambda.at(k, b))));
        capacity.push(poisson(&mut rng, cap_mean));
    }
    let arrivals = ArrivalTrace::from_counts(instance.categories().to_vec(), instance.boroughs().to_vec(), counts)?;
    Ok((arrivals, CapacityTrace::new(capacity)?))
}
