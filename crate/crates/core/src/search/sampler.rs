use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const MUTATION_SIGMA: f64 = 0.1;
const CROSSOVER_PROB: f64 = 0.5;

/// Coordinates of a raw policy vector that are probabilities (clamped to
/// `[0, 1]`); the rest are non-negative weights.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub dim: usize,
    pub fractions_from: usize,
}

/// Point `index` of an Owen-scrambled Sobol sequence in `[0, 1)^dim`.
pub(crate) fn sobol_point(index: u64, dim: usize, seed: u64) -> Vec<f64> {
    let per_seed = 1u64 << 16;
    let n_dims = sobol_burley::NUM_DIMENSIONS as usize;
    let base = (seed as u32) ^ ((seed >> 32) as u32);
    let epoch = (index / per_seed) as u32;
    let i = (index % per_seed) as u32;
    (0..dim)
        .map(|d| {
            let block = (d / n_dims) as u32;
            let s = base
                .wrapping_add(epoch.wrapping_mul(0x9E37_79B9))
                .wrapping_add(block.wrapping_mul(0x85EB_CA6B));
            f64::from(sobol_burley::sample(i, (d % n_dims) as u32, s))
        })
        .collect()
}

pub(crate) fn sobol_batch(start: u64, count: usize, layout: &Layout, seed: u64) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|j| sobol_point(start + j, layout.dim, seed))
        .collect()
}

/// Children of the current front: a uniform parent, optional uniform
/// crossover with a second parent, then Gaussian mutation.
pub(crate) fn evolve_batch(parents: &[Vec<f64>], count: usize, layout: &Layout, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, MUTATION_SIGMA).expect("valid sigma");
    (0..count)
        .map(|_| {
            let a = parents.choose(&mut rng).expect("non-empty front");
            let mut child = a.clone();
            if parents.len() > 1 && rng.random_bool(CROSSOVER_PROB) {
                let b = parents.choose(&mut rng).expect("non-empty front");
                for (c, &v) in child.iter_mut().zip(b) {
                    if rng.random_bool(0.5) {
                        *c = v;
                    }
                }
            }
            for (i, c) in child.iter_mut().enumerate() {
                let v = *c + noise.sample(&mut rng);
                *c = if i >= layout.fractions_from { v.clamp(0.0, 1.0) } else { v.max(0.0) };
            }
            child
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sobol_points_in_unit_cube() {
        let layout = Layout { dim: 300, fractions_from: 0 };
        for p in sobol_batch(0, 16, &layout, 3) {
            assert_eq!(p.len(), 300);
            assert!(p.iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn sobol_is_stratified_in_one_dimension() {
        let pts = sobol_batch(0, 64, &Layout { dim: 1, fractions_from: 0 }, 11);
        let mut bins = [0usize; 8];
        for p in pts {
            bins[(p[0] * 8.0) as usize] += 1;
        }
        assert!(bins.iter().all(|&n| n == 8));
    }

    #[test]
    fn children_respect_bounds() {
        let layout = Layout { dim: 4, fractions_from: 2 };
        let parents = vec![vec![0.0, 0.05, 0.99, 1.0], vec![0.5, 0.5, 0.0, 0.01]];
        let kids = evolve_batch(&parents, 200, &layout, 5);
        for k in &kids {
            assert!(k[0] >= 0.0 && k[1] >= 0.0);
            assert!((0.0..=1.0).contains(&k[2]) && (0.0..=1.0).contains(&k[3]));
        }
        assert_eq!(kids, evolve_batch(&parents, 200, &layout, 5));
    }
}
