//! Counter-based Gaussian draws for reproducible parallel Monte Carlo.
//!
//! Every increment is a pure function of `(seed, sample, step, component)`,
//! so ensembles are bit-identical regardless of thread count or evaluation
//! order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::TimeGrid;

const GOLDEN: u64 = 0x9e3779b97f4a7c15;

/// splitmix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit hash of a (seed, sample, step, component) counter.
#[inline]
pub fn counter_hash(seed: u64, sample: u64, step: u64, component: u64) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    h = mix64(h ^ sample.wrapping_mul(GOLDEN));
    h = mix64(h ^ step.wrapping_mul(0xc2b2ae3d27d4eb4f));
    mix64(h ^ component.wrapping_mul(0x165667b19e3779f9))
}

/// Uniform draw in the open interval (0, 1).
#[inline]
pub fn counter_uniform(seed: u64, sample: u64, step: u64, component: u64) -> f64 {
    let bits = counter_hash(seed, sample, step, component) >> 11; // 53 bits
    (bits as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Standard normal draw keyed by the counter, via the inverse CDF.
#[inline]
pub fn counter_normal(seed: u64, sample: u64, step: u64, component: u64) -> f64 {
    inverse_normal_cdf(counter_uniform(seed, sample, step, component))
}

/// Acklam's rational approximation of the inverse normal CDF
/// (relative error below 1.15e-9 on (0, 1)).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Ensemble of Brownian increments: `n_samples x n_steps x dim` draws with
/// variance `dt`, reproducible from the seed alone.
#[derive(Debug, Clone)]
pub struct BrownianEnsemble {
    grid: TimeGrid,
    n_samples: usize,
    dim: usize,
    seed: u64,
    increments: Vec<f64>,
}

impl BrownianEnsemble {
    pub fn generate(grid: TimeGrid, n_samples: usize, dim: usize, seed: u64) -> Result<Self> {
        if n_samples < 1 || dim < 1 {
            return Err(Error::domain("ensemble needs n_samples >= 1 and dim >= 1"));
        }
        let n_steps = grid.n_steps();
        let sqrt_dt = grid.dt().sqrt();
        let mut increments = vec![0.0; n_samples * n_steps * dim];
        increments
            .par_chunks_mut(n_steps * dim)
            .enumerate()
            .for_each(|(m, chunk)| {
                for i in 0..n_steps {
                    for j in 0..dim {
                        chunk[i * dim + j] =
                            sqrt_dt * counter_normal(seed, m as u64, i as u64, j as u64);
                    }
                }
            });
        Ok(BrownianEnsemble {
            grid,
            n_samples,
            dim,
            seed,
            increments,
        })
    }

    /// Wrap externally supplied increments (e.g. the exhaustive Bernoulli
    /// paths of a scenario tree).
    pub fn from_increments(
        grid: TimeGrid,
        n_samples: usize,
        dim: usize,
        increments: Vec<f64>,
    ) -> Result<Self> {
        if increments.len() != n_samples * grid.n_steps() * dim {
            return Err(Error::domain(format!(
                "expected {} increments, got {}",
                n_samples * grid.n_steps() * dim,
                increments.len()
            )));
        }
        Ok(BrownianEnsemble {
            grid,
            n_samples,
            dim,
            seed: 0,
            increments,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Increment vector `dW_i` for sample `m` at step `i`.
    #[inline]
    pub fn increment(&self, m: usize, i: usize) -> &[f64] {
        let base = (m * self.grid.n_steps() + i) * self.dim;
        &self.increments[base..base + self.dim]
    }
}
