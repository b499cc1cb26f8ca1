//! Discrete sampling primitives shared by the borough and city simulations.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Multinomial draw by sequential conditional binomials, in slice order.
///
/// Zero weights always receive zero; the last positive weight takes the
/// remainder without consuming randomness. With no positive weight every
/// count is zero.
pub(crate) fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let Some(last) = weights.iter().rposition(|&w| w > 0.0) else {
        return out;
    };
    let mut mass: f64 = weights.iter().filter(|&&w| w > 0.0).sum();
    let mut left = n;
    for (i, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if !(w > 0.0) {
            continue;
        }
        if i == last {
            out[i] = left;
            break;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, p).expect("probability in [0, 1]").sample(rng);
        out[i] = draw;
        left -= draw;
        mass -= w;
    }
    out
}

/// Splits `amount` units over members with finite `room`, by `weights`
/// renormalized over members that still have room.
///
/// Draws beyond a member's room spill over to the members still open, by the
/// same rule, until the amount is used or every member is full. When all
/// open members have zero weight they share uniformly. Returns the per-member
/// allocation and the unusable remainder.
pub(crate) fn allocate_capped<R: Rng + ?Sized>(
    rng: &mut R,
    amount: u64,
    room: &[u64],
    weights: &[f64],
) -> (Vec<u64>, u64) {
    let mut alloc = vec![0u64; room.len()];
    let mut open: Vec<u64> = room.to_vec();
    let mut amount = amount;
    while amount > 0 {
        let eligible: Vec<bool> = open.iter().map(|&r| r > 0).collect();
        if !eligible.contains(&true) {
            break;
        }
        let mut w: Vec<f64> = weights
            .iter()
            .zip(&eligible)
            .map(|(&w, &e)| if e { w.max(0.0) } else { 0.0 })
            .collect();
        if !w.iter().any(|&v| v > 0.0) {
            w = eligible.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
        }
        let draws = multinomial(rng, amount, &w);
        amount = 0;
        for (i, d) in draws.into_iter().enumerate() {
            let take = d.min(open[i]);
            alloc[i] += take;
            open[i] -= take;
            amount += d - take;
        }
    }
    (alloc, amount)
}
