//! Euler-Maruyama simulation of the path-dependent forward SDE with
//! non-anticipative coefficient functionals and initial-segment insertion.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::{DiscretePath, PathSlice, TimeGrid};
use crate::rng::BrownianEnsemble;

pub type Coefficient = Arc<dyn Fn(f64, &PathSlice, &mut [f64]) + Send + Sync>;

/// Non-anticipative drift/diffusion functionals `b(t, phi_(t))`,
/// `sigma(t, phi_(t))` with Lipschitz metadata.
///
/// Coefficients receive the path only up to the evaluation time (a
/// [`PathSlice`]), so they cannot peek past it.
#[derive(Clone)]
pub struct ForwardModel {
    pub name: String,
    pub dim: usize,
    pub noise_dim: usize,
    /// Lipschitz constant of (b, sigma) in the path, metadata only.
    pub lipschitz: f64,
    drift: Coefficient,
    /// Row-major `dim x noise_dim` diffusion matrix.
    diffusion: Coefficient,
}

impl std::fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ForwardModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        noise_dim: usize,
        lipschitz: f64,
        drift: Coefficient,
        diffusion: Coefficient,
    ) -> Self {
        ForwardModel {
            name: name.into(),
            dim,
            noise_dim,
            lipschitz,
            drift,
            diffusion,
        }
    }

    /// Evaluate the drift on the path stopped at node `i`.
    pub fn drift_at(&self, phi: &DiscretePath, i: usize, out: &mut [f64]) {
        let t = phi.grid().time(i);
        (self.drift)(t, &phi.slice_to(i), out);
    }

    /// Evaluate the diffusion on the path stopped at node `i`.
    pub fn diffusion_at(&self, phi: &DiscretePath, i: usize, out: &mut [f64]) {
        let t = phi.grid().time(i);
        (self.diffusion)(t, &phi.slice_to(i), out);
    }

    /// Geometric Brownian motion `dX = mu X dt + vol X dW` (scalar).
    pub fn gbm(mu: f64, vol: f64) -> Self {
        ForwardModel::new(
            format!("gbm(mu={mu},vol={vol})"),
            1,
            1,
            mu.abs() + vol.abs(),
            Arc::new(move |_t, phi: &PathSlice, out: &mut [f64]| {
                out[0] = mu * phi.current_scalar();
            }),
            Arc::new(move |_t, phi: &PathSlice, out: &mut [f64]| {
                out[0] = vol * phi.current_scalar();
            }),
        )
    }

    /// Arithmetic Brownian motion `dX = drift dt + vol dW` (scalar).
    pub fn brownian(drift: f64, vol: f64) -> Self {
        ForwardModel::new(
            format!("brownian(drift={drift},vol={vol})"),
            1,
            1,
            0.0,
            Arc::new(move |_t, _phi: &PathSlice, out: &mut [f64]| out[0] = drift),
            Arc::new(move |_t, _phi: &PathSlice, out: &mut [f64]| out[0] = vol),
        )
    }

    /// Drift reads the lagged state: `dX = kappa X(t - lag) dt + vol dW`.
    pub fn lagged_drift(kappa: f64, lag_steps: usize, vol: f64) -> Self {
        ForwardModel::new(
            format!("lagged_drift(kappa={kappa},lag_steps={lag_steps},vol={vol})"),
            1,
            1,
            kappa.abs(),
            Arc::new(move |_t, phi: &PathSlice, out: &mut [f64]| {
                out[0] = kappa * phi.lagged_scalar(lag_steps);
            }),
            Arc::new(move |_t, _phi: &PathSlice, out: &mut [f64]| out[0] = vol),
        )
    }

    /// Drift reads the running average: `dX = kappa avg(X, [0,t]) dt + vol dW`.
    pub fn running_average_drift(kappa: f64, vol: f64) -> Self {
        ForwardModel::new(
            format!("running_average_drift(kappa={kappa},vol={vol})"),
            1,
            1,
            kappa.abs(),
            Arc::new(move |_t, phi: &PathSlice, out: &mut [f64]| {
                out[0] = kappa * phi.running_average();
            }),
            Arc::new(move |_t, _phi: &PathSlice, out: &mut [f64]| out[0] = vol),
        )
    }

    /// Scalar linear drift `dX = a X dt + vol dW`.
    pub fn linear_drift(a: f64, vol: f64) -> Self {
        ForwardModel::new(
            format!("linear_drift(a={a},vol={vol})"),
            1,
            1,
            a.abs(),
            Arc::new(move |_t, phi: &PathSlice, out: &mut [f64]| {
                out[0] = a * phi.current_scalar();
            }),
            Arc::new(move |_t, _phi: &PathSlice, out: &mut [f64]| out[0] = vol),
        )
    }
}

/// Simulated forward ensemble: `n_samples` paths equal to `phi` on
/// `[t0, t]` and Euler-Maruyama continuations on `(t, T]`.
#[derive(Debug, Clone)]
pub struct ForwardEnsemble {
    grid: TimeGrid,
    dim: usize,
    n_samples: usize,
    start_index: usize,
    values: Vec<f64>, // n_samples x n_points x dim, flat
}

impl ForwardEnsemble {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    /// View of sample `m` up to node `i` inclusive.
    #[inline]
    pub fn slice(&self, m: usize, i: usize) -> PathSlice<'_> {
        let stride = self.grid.n_points() * self.dim;
        PathSlice::new(
            self.grid,
            self.dim,
            &self.values[m * stride..m * stride + (i + 1) * self.dim],
        )
    }

    /// Full path of sample `m` as an owned `DiscretePath`.
    pub fn path(&self, m: usize) -> DiscretePath {
        let stride = self.grid.n_points() * self.dim;
        DiscretePath::new(
            self.grid,
            self.dim,
            self.values[m * stride..(m + 1) * stride].to_vec(),
        )
        .expect("ensemble values are finite by construction")
    }

    #[inline]
    pub fn value(&self, m: usize, i: usize) -> &[f64] {
        let stride = self.grid.n_points() * self.dim;
        &self.values[m * stride + i * self.dim..m * stride + (i + 1) * self.dim]
    }

    #[inline]
    pub fn scalar(&self, m: usize, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[m * self.grid.n_points() + i]
    }

    /// CSV export: `sample,t,x1,...,xd`, one row per (sample, node).
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("sample,t");
        for j in 1..=self.dim {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for m in 0..self.n_samples {
            for i in 0..self.grid.n_points() {
                let _ = write!(out, "{m},{}", self.grid.time(i));
                for v in self.value(m, i) {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Simulate the forward SDE from initial datum `(t, phi)`.
///
/// Coefficients are frozen at the left endpoint and evaluated on the
/// stopped simulated path; the initial segment `[t0, t]` is copied from
/// `phi` bit-exactly.
pub fn simulate_forward(
    t: f64,
    phi: &DiscretePath,
    model: &ForwardModel,
    bm: &BrownianEnsemble,
) -> Result<ForwardEnsemble> {
    let grid = *phi.grid();
    if *bm.grid() != grid {
        return Err(Error::domain("Brownian ensemble grid does not match the path grid"));
    }
    if phi.dim() != model.dim || bm.dim() != model.noise_dim {
        return Err(Error::domain("model dimensions do not match path/ensemble"));
    }
    let start_index = grid.index_of(t)?;
    let d = model.dim;
    let dp = model.noise_dim;
    let n_points = grid.n_points();
    let n_samples = bm.n_samples();
    let dt = grid.dt();

    let mut values = vec![0.0; n_samples * n_points * d];
    values
        .par_chunks_mut(n_points * d)
        .enumerate()
        .try_for_each(|(m, chunk)| -> Result<()> {
            chunk[..(start_index + 1) * d]
                .copy_from_slice(&phi.values()[..(start_index + 1) * d]);
            let mut b = vec![0.0; d];
            let mut sig = vec![0.0; d * dp];
            for i in start_index..grid.n_steps() {
                let slice = PathSlice::new(grid, d, &chunk[..(i + 1) * d]);
                let ti = grid.time(i);
                (model.drift)(ti, &slice, &mut b);
                (model.diffusion)(ti, &slice, &mut sig);
                if b.iter().chain(sig.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Simulation { step: i, sample: m });
                }
                let dw = bm.increment(m, i);
                for r in 0..d {
                    let mut x = chunk[i * d + r] + b[r] * dt;
                    for c in 0..dp {
                        x += sig[r * dp + c] * dw[c];
                    }
                    if !x.is_finite() {
                        return Err(Error::Simulation { step: i, sample: m });
                    }
                    chunk[(i + 1) * d + r] = x;
                }
            }
            Ok(())
        })?;

    Ok(ForwardEnsemble {
        grid,
        dim: d,
        n_samples,
        start_index,
        values,
    })
}

/// Empirical stability ratio `E[sup |X^{t,phi} - X^{t,phi'}|^2] / ||phi - phi'||_T^2`
/// under common random numbers.
pub fn lipschitz_probe(
    t: f64,
    phi: &DiscretePath,
    phi2: &DiscretePath,
    model: &ForwardModel,
    bm: &BrownianEnsemble,
) -> Result<f64> {
    let denom = phi.sup_norm_diff(phi2)?;
    if denom == 0.0 {
        return Err(Error::domain("paths are identical; Lipschitz ratio undefined"));
    }
    let a = simulate_forward(t, phi, model, bm)?;
    let b = simulate_forward(t, phi2, model, bm)?;
    let n_points = a.grid.n_points();
    let mean_sup_sq: f64 = (0..a.n_samples)
        .map(|m| {
            (0..n_points)
                .map(|i| {
                    a.value(m, i)
                        .iter()
                        .zip(b.value(m, i))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / a.n_samples as f64;
    Ok(mean_sup_sq / (denom * denom))
}
