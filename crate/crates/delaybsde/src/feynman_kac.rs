//! The deterministic value functional `u(t, phi) = Y^{t,phi}(t)`: the
//! forward sweep in initial time that enforces the supplementary initial
//! condition, plus the out-of-sample consistency check of the
//! representation `Y(s) = u(s, X)` and the continuity probe.

use crate::bsde::{solve_delayed_bsde, PastValues, PicardTrace, SolverConfig};
use crate::error::{Error, Result};
use crate::forward::{simulate_forward, ForwardModel};
use crate::generators::GeneratorSpec;
use crate::paths::DiscretePath;
use crate::payoff::Payoff;
use crate::regression::StepSurrogate;
use crate::rng::BrownianEnsemble;

/// Values of `u(t_i, phi)` along a sub-grid of initial times, anchored at
/// one path, together with the per-time regression surrogates of
/// `u(t_i, .)`.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    times: Vec<f64>,
    values: Vec<f64>,
    std_errs: Vec<f64>,
    phi: DiscretePath,
    /// Surrogate of `u(t_i, .)` frozen at each sweep node's start step.
    surrogates: Vec<StepSurrogate>,
}

impl ValueSurface {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn std_errs(&self) -> &[f64] {
        &self.std_errs
    }

    pub fn phi(&self) -> &DiscretePath {
        &self.phi
    }

    pub fn surrogate(&self, node: usize) -> &StepSurrogate {
        &self.surrogates[node]
    }

    pub fn value_at_time(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() < 1e-12)
            .map(|i| self.values[i])
    }

    /// Past-value view for a later solve starting inside this surface.
    pub fn as_past_values(&self) -> PastValues {
        PastValues::from_points(self.times.iter().cloned().zip(self.values.iter().cloned()).collect())
    }

    /// CSV export: `t,u,std_err`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("t,u,std_err\n");
        for i in 0..self.times.len() {
            let _ = writeln!(out, "{},{},{}", self.times[i], self.values[i], self.std_errs[i]);
        }
        out
    }
}

/// Evaluate `u(t, phi)` by one delayed solve; past values must cover
/// `[t - delta, t)` when `t > 0` and the generator has memory.
pub fn u_at(
    t: f64,
    phi: &DiscretePath,
    model: &ForwardModel,
    gen: &GeneratorSpec,
    payoff: &Payoff,
    past_u: &PastValues,
    cfg: &SolverConfig,
    bm: &BrownianEnsemble,
) -> Result<(f64, f64, PicardTrace)> {
    let (sol, trace) = solve_delayed_bsde(t, phi, model, gen, payoff, past_u, cfg, bm)?;
    Ok((sol.u0, sol.u0_std_err, trace))
}

/// Sweep initial times upward along the grid (every `stride` nodes, with
/// the endpoints always included) and return the surface of `u(t_i, phi)`.
///
/// At each node the supplementary initial condition is supplied by the
/// surface values already computed below it; at `t = 0` the pre-history
/// is the constant prolongation and no past values are needed.
pub fn u_surface(
    phi: &DiscretePath,
    model: &ForwardModel,
    gen: &GeneratorSpec,
    payoff: &Payoff,
    cfg: &SolverConfig,
    bm: &BrownianEnsemble,
    stride: usize,
) -> Result<ValueSurface> {
    let grid = *phi.grid();
    let n_steps = grid.n_steps();
    let stride = stride.max(1);

    let mut nodes: Vec<usize> = (0..n_steps).step_by(stride).collect();
    nodes.push(n_steps);

    let mut times = Vec::with_capacity(nodes.len());
    let mut values = Vec::with_capacity(nodes.len());
    let mut std_errs = Vec::with_capacity(nodes.len());
    let mut surrogates = Vec::with_capacity(nodes.len());
    let mut past = PastValues::empty();

    for &i in &nodes {
        let t = grid.time(i);
        let (sol, _trace) = solve_delayed_bsde(t, phi, model, gen, payoff, &past, cfg, bm)
            .map_err(|e| Error::State(format!("surface sweep failed at initial time {t}: {e}")))?;
        times.push(t);
        values.push(sol.u0);
        std_errs.push(sol.u0_std_err);
        surrogates.push(sol.surrogate(i).clone());
        past.push(t, sol.u0);
    }

    // the sweep ends at the horizon, where u(T, phi) = h(phi) exactly
    debug_assert_eq!(*times.last().unwrap(), grid.horizon());

    Ok(ValueSurface {
        times,
        values,
        std_errs,
        phi: phi.clone(),
        surrogates,
    })
}

/// Per-step out-of-sample errors of the representation `Y(s) = u(s, X)`.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// Step indices covered by the comparison.
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// Ensemble mean of `|Y(s) - u_hat(s, X)|` on the fresh ensemble.
    pub mean_errors: Vec<f64>,
    /// Ensemble max of the same.
    pub max_errors: Vec<f64>,
    /// Max over steps of the ensemble-mean error.
    pub max_error: f64,
    /// Largest in-sample regression residual of the training solve.
    pub in_sample_residual: f64,
}

impl ConsistencyReport {
    /// CSV export: `s,mean_error,max_error`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("s,mean_error,max_error\n");
        for k in 0..self.steps.len() {
            let _ = writeln!(out, "{},{},{}", self.times[k], self.mean_errors[k], self.max_errors[k]);
        }
        out
    }
}

/// Train on `bm_train`, then re-solve on the fresh ensemble `bm_test` and
/// compare its pathwise `Y(s)` against the frozen surrogate of `u(s, .)`
/// evaluated on the fresh paths. The returned max error is the computable
/// projection of the almost-sure identity `Y(s) = u(s, X)`.
pub fn check_fk_consistency(
    t: f64,
    phi: &DiscretePath,
    model: &ForwardModel,
    gen: &GeneratorSpec,
    payoff: &Payoff,
    past_u: &PastValues,
    cfg: &SolverConfig,
    bm_train: &BrownianEnsemble,
    bm_test: &BrownianEnsemble,
) -> Result<ConsistencyReport> {
    let (trained, _) = solve_delayed_bsde(t, phi, model, gen, payoff, past_u, cfg, bm_train)?;
    let (fresh, _) = solve_delayed_bsde(t, phi, model, gen, payoff, past_u, cfg, bm_test)?;

    let fwd_test = simulate_forward(t, phi, model, bm_test)?;
    let grid = phi.grid();
    let n_samples = bm_test.n_samples();
    let start = trained.start_index();

    let mut steps = Vec::new();
    let mut times = Vec::new();
    let mut mean_errors = Vec::new();
    let mut max_errors = Vec::new();
    let mut max_error = 0.0f64;

    for i in start..=grid.n_steps() {
        let surrogate = trained.surrogate(i);
        let mut sum = 0.0;
        let mut worst = 0.0f64;
        for m in 0..n_samples {
            let u_hat = surrogate.eval(&fwd_test.slice(m, i))?;
            let err = (fresh.y(m, i) - u_hat).abs();
            sum += err;
            worst = worst.max(err);
        }
        let mean = sum / n_samples as f64;
        steps.push(i);
        times.push(grid.time(i));
        mean_errors.push(mean);
        max_errors.push(worst);
        max_error = max_error.max(mean);
    }

    Ok(ConsistencyReport {
        steps,
        times,
        mean_errors,
        max_errors,
        max_error,
        in_sample_residual: trained.max_regression_residual(),
    })
}

/// Continuity probe of `u(t, .)`: evaluates `u(t, phi + eps psi)` for each
/// perturbation size with common random numbers and returns the modulus
/// table `(eps, |delta u|)`.
pub fn check_u_continuity(
    t: f64,
    phi: &DiscretePath,
    psi: &DiscretePath,
    eps_list: &[f64],
    model: &ForwardModel,
    gen: &GeneratorSpec,
    payoff: &Payoff,
    past_u: &PastValues,
    cfg: &SolverConfig,
    bm: &BrownianEnsemble,
) -> Result<Vec<(f64, f64)>> {
    let (base, _, _) = u_at(t, phi, model, gen, payoff, past_u, cfg, bm)?;
    let mut table = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if eps == 0.0 {
            table.push((0.0, 0.0));
            continue;
        }
        let bumped = phi.add_scaled(psi, eps)?;
        let (u_eps, _, _) = u_at(t, &bumped, model, gen, payoff, past_u, cfg, bm)?;
        table.push((eps, (u_eps - base).abs()));
    }
    Ok(table)
}
