//! Diversified starting points: Latin-hypercube samples of the phase cube
//! and Gaussian perturbations of an incumbent.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Points per Latin-hypercube block. Point `i` belongs to block
/// `i / LHS_BLOCK`, so the pool for a seed is fixed regardless of how many
/// points are drawn.
pub const LHS_BLOCK: usize = 32;

/// Point `index` of the seed's Latin-hypercube pool over `[0, 2π)^dims`.
pub fn latin_hypercube_point(seed: u64, index: usize, dims: usize) -> Vec<f64> {
    let block = index / LHS_BLOCK;
    let row = index % LHS_BLOCK;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64 + 1);
    let mut strata: Vec<usize> = (0..LHS_BLOCK).collect();
    (0..dims)
        .map(|_| {
            strata.shuffle(&mut rng);
            let jitter: Vec<f64> = (0..LHS_BLOCK).map(|_| rng.random::<f64>()).collect();
            (strata[row] as f64 + jitter[row]) / LHS_BLOCK as f64 * TAU
        })
        .collect()
}

/// `base` plus i.i.d. normal noise of standard deviation `sigma` radians,
/// wrapped to `[0, 2π)`.
pub fn perturb(base: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    base.iter()
        .map(|&x| (x + normal.sample(&mut rng)).rem_euclid(TAU))
        .collect()
}
