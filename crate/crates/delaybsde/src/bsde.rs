//! The core solver: regression-based backward induction for a standard
//! Lipschitz BSDE, wrapped in the Picard iteration that resolves the
//! time-delayed generator by freezing the delayed argument at the
//! previous iterate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{simulate_forward, ForwardEnsemble, ForwardModel};
use crate::generators::{check_contraction, check_contraction_auto, GeneratorSpec};
use crate::paths::{DiscretePath, PathSegment, PathSlice, TimeGrid};
use crate::payoff::Payoff;
use crate::regression::{build_design, project_with_basis, RegressionBasis, StepSurrogate};
use crate::rng::BrownianEnsemble;

/// What to do when the contraction condition fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionPolicy {
    /// Print a warning and proceed (the condition is sufficient, not
    /// necessary; Picard may still converge empirically).
    Warn,
    Abort,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative Picard tolerance.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Exponential weight of the residual norms (0 = plain norms).
    pub beta_weight: f64,
    pub contraction_policy: ContractionPolicy,
    pub basis: RegressionBasis,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            picard_tol: 1e-6,
            picard_max_iter: 50,
            beta_weight: 0.0,
            contraction_policy: ContractionPolicy::Warn,
            basis: RegressionBasis::Polynomial { degree: 3 },
        }
    }
}

/// Per-iteration relative residuals of the Picard loop.
#[derive(Debug, Clone)]
pub struct PicardTrace {
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardTrace {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("iteration,residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(out, "{},{r}", i + 1);
        }
        out
    }
}

/// Ensemble-aligned solution of one (frozen-generator) BSDE pass.
#[derive(Debug, Clone)]
pub struct BsdeSolution {
    grid: TimeGrid,
    start_index: usize,
    n_samples: usize,
    noise_dim: usize,
    /// `n_samples x n_points`, sample-major; zero before the start index.
    y: Vec<f64>,
    /// `n_samples x n_steps x noise_dim`, sample-major; zero before start.
    z: Vec<f64>,
    /// Frozen regression surrogate of `u(t_i, .)` per step.
    y_surrogates: Vec<StepSurrogate>,
    /// Frozen surrogates of the `Z` projection, `[step][noise component]`.
    z_surrogates: Vec<Vec<StepSurrogate>>,
    /// Range of the fitted `Z` values per step and component; evaluating
    /// the surrogate outside the data it was fit on is extrapolation, so
    /// consumers clamp into this range.
    z_ranges: Vec<Vec<(f64, f64)>>,
    /// In-sample mean absolute regression residual per step.
    regression_residuals: Vec<f64>,
    /// Deterministic value at the start time.
    pub u0: f64,
    /// Monte Carlo standard error of the per-sample value estimator.
    pub u0_std_err: f64,
}

impl BsdeSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    #[inline]
    pub fn y(&self, m: usize, i: usize) -> f64 {
        self.y[m * self.grid.n_points() + i]
    }

    #[inline]
    pub fn z(&self, m: usize, i: usize) -> &[f64] {
        let base = (m * self.grid.n_steps() + i) * self.noise_dim;
        &self.z[base..base + self.noise_dim]
    }

    pub fn y_terminal(&self, m: usize) -> f64 {
        self.y(m, self.grid.n_steps())
    }

    pub fn surrogate(&self, i: usize) -> &StepSurrogate {
        &self.y_surrogates[i]
    }

    /// Frozen surrogate of `Z_j(t_i, .)`.
    pub fn z_surrogate(&self, i: usize, j: usize) -> &StepSurrogate {
        &self.z_surrogates[i][j]
    }

    /// In-sample range of the fitted `Z_j` values at step `i`.
    pub fn z_range(&self, i: usize, j: usize) -> (f64, f64) {
        self.z_ranges[i][j]
    }

    /// Largest in-sample regression residual over the solved steps.
    pub fn max_regression_residual(&self) -> f64 {
        self.regression_residuals
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn regression_residuals(&self) -> &[f64] {
        &self.regression_residuals
    }

    /// Ensemble mean of `Y` at step `i`.
    pub fn y_mean(&self, i: usize) -> f64 {
        (0..self.n_samples).map(|m| self.y(m, i)).sum::<f64>() / self.n_samples as f64
    }

    pub fn y_std(&self, i: usize) -> f64 {
        let mean = self.y_mean(i);
        let var = (0..self.n_samples)
            .map(|m| (self.y(m, i) - mean).powi(2))
            .sum::<f64>()
            / (self.n_samples.max(2) - 1) as f64;
        var.sqrt()
    }

    /// Ensemble variance of all `Z` entries over the solved steps.
    pub fn z_variance(&self) -> f64 {
        let n_steps = self.grid.n_steps();
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for m in 0..self.n_samples {
            for i in self.start_index..n_steps {
                for &v in self.z(m, i) {
                    sum += v;
                    sumsq += v * v;
                    count += 1;
                }
            }
        }
        if count < 2 {
            return 0.0;
        }
        let mean = sum / count as f64;
        (sumsq / count as f64 - mean * mean).max(0.0)
    }

    /// CSV export: step, time, mean Y, std Y, mean |Z|.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("step,t,mean_y,std_y,mean_abs_z\n");
        for i in self.start_index..self.grid.n_points() {
            let mean_abs_z = if i < self.grid.n_steps() {
                (0..self.n_samples)
                    .map(|m| self.z(m, i).iter().map(|v| v.abs()).sum::<f64>())
                    .sum::<f64>()
                    / self.n_samples as f64
            } else {
                0.0
            };
            let _ = writeln!(
                out,
                "{i},{},{},{},{}",
                self.grid.time(i),
                self.y_mean(i),
                self.y_std(i),
                mean_abs_z
            );
        }
        out
    }
}

/// Weighted discrete norm used by the Picard residual:
/// `sqrt( max_i mean_m e^{beta t_i} |dY_i|^2 + dt sum_i mean_m e^{beta t_i} |dZ_i|^2 )`.
fn weighted_norm(
    grid: &TimeGrid,
    start: usize,
    n_samples: usize,
    noise_dim: usize,
    dy: impl Fn(usize, usize) -> f64 + Sync,
    dz: impl Fn(usize, usize, usize) -> f64 + Sync,
    beta: f64,
) -> f64 {
    let n_points = grid.n_points();
    let n_steps = grid.n_steps();
    let mut max_y = 0.0f64;
    for i in start..n_points {
        let w = (beta * grid.time(i)).exp();
        let mean: f64 = (0..n_samples).map(|m| dy(m, i).powi(2)).sum::<f64>() / n_samples as f64;
        max_y = max_y.max(w * mean);
    }
    let mut z_term = 0.0;
    for i in start..n_steps {
        let w = (beta * grid.time(i)).exp();
        let mean: f64 = (0..n_samples)
            .map(|m| (0..noise_dim).map(|j| dz(m, i, j).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n_samples as f64;
        z_term += grid.dt() * w * mean;
    }
    (max_y + z_term).sqrt()
}

/// Distance between two aligned solutions in the discrete analogue of the
/// contraction norms.
pub fn picard_residual(prev: &BsdeSolution, next: &BsdeSolution, beta_weight: f64) -> Result<f64> {
    if prev.grid != next.grid
        || prev.n_samples != next.n_samples
        || prev.noise_dim != next.noise_dim
        || prev.start_index != next.start_index
    {
        return Err(Error::domain("solutions are not aligned"));
    }
    Ok(weighted_norm(
        &next.grid,
        next.start_index,
        next.n_samples,
        next.noise_dim,
        |m, i| next.y(m, i) - prev.y(m, i),
        |m, i, j| next.z(m, i)[j] - prev.z(m, i)[j],
        beta_weight,
    ))
}

fn solution_norm(sol: &BsdeSolution, beta_weight: f64) -> f64 {
    weighted_norm(
        &sol.grid,
        sol.start_index,
        sol.n_samples,
        sol.noise_dim,
        |m, i| sol.y(m, i),
        |m, i, j| sol.z(m, i)[j],
        beta_weight,
    )
}

/// One backward regression pass for a standard Lipschitz BSDE with a
/// frozen generator `(step, sample, stopped path, y, z) -> f64`.
///
/// Backward recursion per step: `Z_i` from the martingale-increment
/// projection, `Y_i` from an implicit-in-y step solved by a short inner
/// fixed point (contraction since `L dt < 1`). At the start step the
/// conditioning sigma-algebra is trivial, so the projection degenerates
/// to the plain ensemble mean and yields `u0`.
pub fn solve_standard_bsde(
    terminal: &[f64],
    gen_frozen: &(dyn Fn(usize, usize, &PathSlice, f64, &[f64]) -> f64 + Sync),
    lip_yz: f64,
    fwd: &ForwardEnsemble,
    bm: &BrownianEnsemble,
    basis: &RegressionBasis,
) -> Result<BsdeSolution> {
    let grid = *fwd.grid();
    let n_samples = fwd.n_samples();
    let n_points = grid.n_points();
    let n_steps = grid.n_steps();
    let noise_dim = bm.dim();
    let start = fwd.start_index();
    let dt = grid.dt();

    if terminal.len() != n_samples {
        return Err(Error::domain("terminal samples are not aligned with the forward ensemble"));
    }
    if lip_yz * dt >= 1.0 {
        return Err(Error::StepSize(format!(
            "L dt = {} >= 1; refine the grid",
            lip_yz * dt
        )));
    }

    let mut y = vec![0.0; n_samples * n_points];
    let mut z = vec![0.0; n_samples * n_steps * noise_dim];
    let mut surrogates: Vec<StepSurrogate> = vec![StepSurrogate::Constant { value: 0.0 }; n_points];
    let mut z_surrogates: Vec<Vec<StepSurrogate>> = vec![Vec::new(); n_steps];
    let mut z_ranges: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_steps];
    let mut residuals = vec![0.0; n_points];

    // terminal condition, bit-exact
    y.par_chunks_mut(n_points)
        .enumerate()
        .for_each(|(m, row)| row[n_steps] = terminal[m]);

    // per-sample value estimator (terminal + accumulated generator terms)
    let mut estimator: Vec<f64> = terminal.to_vec();

    // frozen surrogate of the terminal slice
    if start < n_steps {
        let design = build_design(basis, n_samples, fwd.dim(), |m| fwd.slice(m, n_steps));
        let (fitted, surrogate) = project_with_basis(&design, basis, terminal, n_steps)?;
        residuals[n_steps] = mean_abs_diff(terminal, &fitted);
        surrogates[n_steps] = surrogate;
    } else {
        surrogates[n_steps] = StepSurrogate::Constant { value: terminal[0] };
    }

    for i in (start..n_steps).rev() {
        let y_next: Vec<f64> = (0..n_samples).map(|m| y[m * n_points + i + 1]).collect();

        let trivial = i == start;
        let design = if trivial {
            None
        } else {
            Some(build_design(basis, n_samples, fwd.dim(), |m| fwd.slice(m, i)))
        };

        // E[ Y_{i+1} | F_i ]
        let cond_exp: Vec<f64> = match &design {
            Some(d) => project_with_basis(d, basis, &y_next, i)?.0,
            None => {
                let mean = y_next.iter().sum::<f64>() / n_samples as f64;
                vec![mean; n_samples]
            }
        };

        // Z_i = (1/dt) E[ Y_{i+1} dW_i | F_i ]. Centering the target with
        // the predictable continuation fit leaves the conditional
        // expectation unchanged (E[c dW | F_i] = 0) but removes the
        // O(Var(Y)/dt) part of the target variance, so both the fitted Z
        // noise and the in-sample covariance of the fit with the
        // increments drop by a factor of order |Z|^2 dt / Var(Y).
        let mut z_fit: Vec<Vec<f64>> = Vec::with_capacity(noise_dim);
        for j in 0..noise_dim {
            let targets: Vec<f64> = (0..n_samples)
                .map(|m| (y_next[m] - cond_exp[m]) * bm.increment(m, i)[j] / dt)
                .collect();
            let fitted = match &design {
                Some(d) => {
                    let (fitted, surrogate) = project_with_basis(d, basis, &targets, i)?;
                    z_surrogates[i].push(surrogate);
                    fitted
                }
                None => {
                    let mean = targets.iter().sum::<f64>() / n_samples as f64;
                    z_surrogates[i].push(StepSurrogate::Constant { value: mean });
                    vec![mean; n_samples]
                }
            };
            z_ranges[i].push(trusted_range(&fitted));
            z_fit.push(fitted);
        }

        // implicit-in-y step, explicit in z
        let y_new: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .map(|m| {
                let slice = fwd.slice(m, i);
                let zrow: Vec<f64> = (0..noise_dim).map(|j| z_fit[j][m]).collect();
                let e = cond_exp[m];
                let mut yv = e;
                for _ in 0..5 {
                    let next = e + dt * gen_frozen(i, m, &slice, yv, &zrow);
                    if (next - yv).abs() < 1e-14 * (1.0 + yv.abs()) {
                        yv = next;
                        break;
                    }
                    yv = next;
                }
                yv
            })
            .collect();

        for (m, &val) in y_new.iter().enumerate() {
            if !val.is_finite() {
                return Err(Error::Simulation { step: i, sample: m });
            }
            y[m * n_points + i] = val;
            for j in 0..noise_dim {
                z[(m * n_steps + i) * noise_dim + j] = z_fit[j][m];
            }
            estimator[m] += dt
                * gen_frozen(
                    i,
                    m,
                    &fwd.slice(m, i),
                    val,
                    &(0..noise_dim).map(|j| z_fit[j][m]).collect::<Vec<f64>>(),
                );
        }

        // frozen surrogate of u(t_i, .)
        match &design {
            Some(d) => {
                let (fitted, surrogate) = project_with_basis(d, basis, &y_new, i)?;
                residuals[i] = mean_abs_diff(&y_new, &fitted);
                surrogates[i] = surrogate;
            }
            None => {
                surrogates[i] = StepSurrogate::Constant { value: y_new[0] };
            }
        }
    }

    let u0 = if start == n_steps {
        terminal[0]
    } else {
        (0..n_samples).map(|m| y[m * n_points + start]).sum::<f64>() / n_samples as f64
    };
    let est_mean = estimator.iter().sum::<f64>() / n_samples as f64;
    let est_var = estimator
        .iter()
        .map(|v| (v - est_mean).powi(2))
        .sum::<f64>()
        / (n_samples.max(2) - 1) as f64;
    let u0_std_err = (est_var / n_samples as f64).sqrt();

    Ok(BsdeSolution {
        grid,
        start_index: start,
        n_samples,
        noise_dim,
        y,
        z,
        y_surrogates: surrogates,
        z_surrogates,
        z_ranges,
        regression_residuals: residuals,
        u0,
        u0_std_err,
    })
}

/// Inner percentile band of the fitted values. Polynomial surrogates are
/// only trustworthy where the regression had data mass; the extreme fitted
/// values sit on a handful of tail paths where the fit is extrapolating,
/// so the trusted range drops half a percent on each side.
fn trusted_range(fitted: &[f64]) -> (f64, f64) {
    let mut sorted = fitted.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let lo = sorted[(n as f64 * 0.005) as usize];
    let hi = sorted[((n as f64 * 0.995) as usize).min(n - 1)];
    (lo, hi)
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Deterministic past values `u(s, phi)` on `[max(0, t - delta), t)`,
/// supplying the supplementary initial condition of the backward system.
/// Off-node queries interpolate linearly.
#[derive(Debug, Clone, Default)]
pub struct PastValues {
    points: Vec<(f64, f64)>, // sorted by time
}

impl PastValues {
    pub fn empty() -> Self {
        PastValues { points: Vec::new() }
    }

    pub fn from_points(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        PastValues { points }
    }

    pub fn push(&mut self, t: f64, u: f64) {
        self.points.push((t, u));
        self.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Linear interpolation; clamps outside the stored range.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::State(
                "past values requested but none were supplied".into(),
            ));
        }
        if s <= self.points[0].0 {
            return Ok(self.points[0].1);
        }
        if s >= self.points.last().unwrap().0 {
            return Ok(self.points.last().unwrap().1);
        }
        let idx = self
            .points
            .partition_point(|(t, _)| *t <= s);
        let (t0, u0) = self.points[idx - 1];
        let (t1, u1) = self.points[idx];
        let w = (s - t0) / (t1 - t0);
        Ok(u0 + w * (u1 - u0))
    }
}

/// Solve the BSDE with time-delayed generator by Picard iteration: freeze
/// the delayed argument at the previous iterate (starting from the zero
/// iterate), solve a standard BSDE per pass, and stop when the iterate
/// distance falls below the relative tolerance.
///
/// The delayed segment of iterate `n` at step `i` is read from the
/// iterate's pathwise samples on `[t, T]`, from `past_u` on `[0, t)` and
/// from the constant prolongation before time zero.
pub fn solve_delayed_bsde(
    t: f64,
    phi: &DiscretePath,
    model: &ForwardModel,
    gen: &GeneratorSpec,
    payoff: &Payoff,
    past_u: &PastValues,
    cfg: &SolverConfig,
    bm: &BrownianEnsemble,
) -> Result<(BsdeSolution, PicardTrace)> {
    let grid = *phi.grid();
    let report = if gen.lip_yz > 0.0 {
        check_contraction(gen.lip_delay, gen.lip_yz, gen.delta, grid.horizon(), None)?
    } else {
        check_contraction_auto(gen.lip_delay, 0.0, gen.delta, grid.horizon())?
    };
    if !report.satisfied {
        match cfg.contraction_policy {
            ContractionPolicy::Abort => {
                return Err(Error::ContractionViolated {
                    lhs: report.lhs,
                    margin: report.margin,
                })
            }
            ContractionPolicy::Warn => eprintln!(
                "warning: contraction condition violated (lhs {:.3e} >= 1/290); proceeding",
                report.lhs
            ),
        }
    }

    let fwd = simulate_forward(t, phi, model, bm)?;
    let n_samples = fwd.n_samples();
    let n_points = grid.n_points();
    let start = fwd.start_index();

    let terminal: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|m| payoff.eval(&fwd.slice(m, grid.n_steps())))
        .collect();
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("payoff produced non-finite samples"));
    }

    let delay_steps = if gen.is_markovian() {
        0
    } else {
        grid.delay_steps(gen.delta)?
    };
    if start > 0 && !gen.is_markovian() && past_u.is_empty() && gen.delta > 0.0 {
        return Err(Error::State(
            "delayed solve at t > 0 needs past values of u on [t - delta, t)".into(),
        ));
    }

    // past values at the grid nodes below the start index (same for all samples)
    let past_at_node: Vec<Option<f64>> = (0..start)
        .map(|i| past_u.value_at(grid.time(i)).ok())
        .collect();

    let mut prev_y: Vec<f64> = vec![0.0; n_samples * n_points];
    let mut prev_sol: Option<BsdeSolution> = None;
    let mut residuals: Vec<f64> = Vec::new();

    for _iter in 1..=cfg.picard_max_iter {
        let prev_ref = &prev_y;
        let past_ref = &past_at_node;
        let extended = move |m: usize, idx: isize| -> f64 {
            if idx >= start as isize {
                prev_ref[m * n_points + idx as usize]
            } else if idx >= 0 {
                past_ref[idx as usize].unwrap_or_else(|| prev_ref[m * n_points])
            } else if start > 0 {
                past_ref[0].unwrap_or_else(|| prev_ref[m * n_points])
            } else {
                prev_ref[m * n_points]
            }
        };

        let gen_frozen = |i: usize, m: usize, slice: &PathSlice, yv: f64, zv: &[f64]| -> f64 {
            let ti = grid.time(i);
            if gen.is_markovian() {
                gen.eval(ti, slice, yv, zv, None)
            } else {
                let values: Vec<f64> = (0..=delay_steps)
                    .map(|j| extended(m, i as isize - delay_steps as isize + j as isize))
                    .collect();
                let seg = PathSegment::new(gen.delta, grid.dt(), values)
                    .expect("segment from finite iterate values");
                gen.eval(ti, slice, yv, zv, Some(&seg))
            }
        };

        let next = solve_standard_bsde(&terminal, &gen_frozen, gen.lip_yz, &fwd, bm, &cfg.basis)?;

        let resid = match &prev_sol {
            Some(p) => picard_residual(p, &next, cfg.beta_weight)?,
            None => solution_norm(&next, cfg.beta_weight),
        };
        let rel = resid / (1.0 + solution_norm(&next, cfg.beta_weight));
        residuals.push(rel);

        let converged = rel < cfg.picard_tol;
        prev_y = (0..n_samples * n_points)
            .map(|k| {
                let m = k / n_points;
                let i = k % n_points;
                next.y(m, i)
            })
            .collect();
        prev_sol = Some(next);

        if converged {
            let trace = PicardTrace {
                iterations: residuals.len(),
                residuals,
                converged: true,
            };
            return Ok((prev_sol.unwrap(), trace));
        }
    }

    Err(Error::NonConvergence {
        trace: PicardTrace {
            iterations: residuals.len(),
            residuals,
            converged: false,
        },
    })
}
