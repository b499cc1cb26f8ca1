use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sampling::{allocate_capped, multinomial};
use super::{check_alignment, expand, RunState, SimError, SimulationConfig, SimulationOutcome};
use crate::model::{ArrivalTrace, BoroughBudgetPolicy, CapacityTrace};
use crate::scalar::Scalar;

/// Simulates a policy where every borough runs its own GPS server on a share of daily capacity.
///
/// Each day: arrivals join their queues; the city capacity is split over
/// boroughs with backlog by a multinomial on the budget fractions; each
/// borough splits its share over backlogged categories by a multinomial on
/// the renormalized GPS weights; each category inspects from the front of its
/// queue under the FCFS-violation rule. Capacity drawn beyond a queue's
/// backlog spills to the other backlogged categories of the borough, and a
/// borough's unusable share returns to the city pool for boroughs that still
/// have backlog. On review days every remaining incident is dropped with
/// probability `1 - p`.
pub fn simulate_borough_policy<T: Scalar>(
    arrivals: &ArrivalTrace,
    capacity: &CapacityTrace,
    policy: &BoroughBudgetPolicy<T>,
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
    let budget: Vec<f64> = policy.budget_frac().iter().map(|v| v.as_f64()).collect();
    let gps = policy.gps().map(|v| v.as_f64());
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
            state.enqueue(next);
            next += 1;
        }

        let mut pool = u64::from(daily_capacity[day]);
        while pool > 0 {
            let borough_backlog: Vec<u64> = (0..nb)
                .map(|b| (0..nk).map(|k| state.backlog(k, b)).sum())
                .collect();
            if borough_backlog.iter().all(|&n| n == 0) {
                break;
            }
            let mut weights: Vec<f64> = budget
                .iter()
                .zip(&borough_backlog)
                .map(|(&w, &n)| if n > 0 { w } else { 0.0 })
                .collect();
            if !weights.iter().any(|&w| w > 0.0) {
                weights = borough_backlog.iter().map(|&n| if n > 0 { 1.0 } else { 0.0 }).collect();
            }
            let shares = multinomial(&mut rng, pool, &weights);
            pool = 0;
            for (b, &share) in shares.iter().enumerate() {
                if share == 0 {
                    continue;
                }
                let room: Vec<u64> = (0..nk).map(|k| state.backlog(k, b)).collect();
                let phi: Vec<f64> = (0..nk).map(|k| gps.at(k, b)).collect();
                let (alloc, unused) = allocate_capped(&mut rng, share, &room, &phi);
                for (k, &n) in alloc.iter().enumerate() {
                    state.serve(&mut rng, k, b, n as usize, rho, d);
                }
                pool += unused;
            }
        }

        if (day as u64 + 1) % u64::from(config.review_period) == 0 {
            for b in 0..nb {
                for k in 0..nk {
                    let p = target.at(k, b);
                    if p >= 1.0 {
                        continue;
                    }
                    let q = state.queue_index(k, b);
                    let queue = std::mem::take(&mut state.queues[q]);
                    let mut kept = VecDeque::with_capacity(queue.len());
                    for incident in queue {
                        if p <= 0.0 || rng.random_bool(1.0 - p) {
                            state.drop_now(incident, d);
                        } else {
                            kept.push_back(incident);
                        }
                    }
                    state.queues[q] = kept;
                }
            }
        }
    }

    Ok(state.finish(nk, horizon, daily_capacity, arrivals.regions().to_vec()))
}
