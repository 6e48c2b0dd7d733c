//! Delayed generator library: evaluatable drivers `F(t, phi, y, z, yhat)`
//! with Lipschitz/growth metadata, the delay measure quadrature, and the
//! contraction-condition checker.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::{PathSegment, PathSlice};

/// Smallness threshold of the contraction condition.
pub const CONTRACTION_THRESHOLD: f64 = 1.0 / 290.0;

/// Probability measure on the delay window `[-delta, 0]`, realized as
/// quadrature weights on the segment sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayMeasure {
    /// Lebesgue-uniform on `[-delta, 0]` (trapezoid weights).
    Uniform,
    /// Point mass at `-delta`.
    DiracAtDelay,
    /// Explicit nonnegative weights on the sub-grid, summing to 1.
    Discrete(Vec<f64>),
}

impl DelayMeasure {
    /// Quadrature weights for a segment with `n_nodes` samples covering
    /// `[-delta, 0]`. Weights are nonnegative and sum to 1.
    pub fn weights(&self, n_nodes: usize) -> Result<Vec<f64>> {
        if n_nodes < 2 {
            return Err(Error::domain("delay segment needs at least two nodes"));
        }
        match self {
            DelayMeasure::Uniform => {
                let k = (n_nodes - 1) as f64;
                let mut w = vec![1.0 / k; n_nodes];
                w[0] = 0.5 / k;
                w[n_nodes - 1] = 0.5 / k;
                Ok(w)
            }
            DelayMeasure::DiracAtDelay => {
                let mut w = vec![0.0; n_nodes];
                w[0] = 1.0;
                Ok(w)
            }
            DelayMeasure::Discrete(w) => {
                if w.len() != n_nodes {
                    return Err(Error::config(format!(
                        "discrete delay measure has {} weights, segment has {} nodes",
                        w.len(),
                        n_nodes
                    )));
                }
                if w.iter().any(|x| *x < 0.0) {
                    return Err(Error::config("delay measure weights must be nonnegative"));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!(
                        "delay measure weights sum to {sum}, expected 1"
                    )));
                }
                Ok(w.clone())
            }
        }
    }
}

pub type GeneratorFn =
    Arc<dyn Fn(f64, &PathSlice, f64, &[f64], Option<&PathSegment>) -> f64 + Send + Sync>;

/// An evaluatable delayed generator `F(t, phi, y, z, yhat)` together with
/// the assumption metadata used by the contraction checker and the
/// property tests.
#[derive(Clone)]
pub struct GeneratorSpec {
    pub name: String,
    /// Lipschitz constant in `(y, z)`.
    pub lip_yz: f64,
    /// Lipschitz constant in the delayed segment (quadrature form).
    pub lip_delay: f64,
    /// Growth metadata `|F(t, phi, 0, 0, 0)| <= growth_m (1 + ||phi||^growth_p)`.
    pub growth_m: f64,
    pub growth_p: f64,
    /// Delay window length; 0 for Markovian generators.
    pub delta: f64,
    pub measure: DelayMeasure,
    eval: GeneratorFn,
}

impl std::fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("name", &self.name)
            .field("lip_yz", &self.lip_yz)
            .field("lip_delay", &self.lip_delay)
            .field("delta", &self.delta)
            .finish()
    }
}

impl GeneratorSpec {
    pub fn eval(
        &self,
        t: f64,
        x_path: &PathSlice,
        y: f64,
        z: &[f64],
        y_hat: Option<&PathSegment>,
    ) -> f64 {
        (self.eval)(t, x_path, y, z, y_hat)
    }

    pub fn is_markovian(&self) -> bool {
        self.delta == 0.0
    }

    /// Assemble a generator from a raw evaluation closure plus metadata.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: impl Into<String>,
        lip_yz: f64,
        lip_delay: f64,
        growth_m: f64,
        growth_p: f64,
        delta: f64,
        measure: DelayMeasure,
        eval: GeneratorFn,
    ) -> Self {
        GeneratorSpec {
            name: name.into(),
            lip_yz,
            lip_delay,
            growth_m,
            growth_p,
            delta,
            measure,
            eval,
        }
    }

    /// Moving-average generator `(beta / delta) * int_{-delta}^0 yhat`.
    ///
    /// By Cauchy-Schwarz against the uniform measure the tightest delay
    /// Lipschitz constant is `K = beta^2`.
    pub fn moving_average(beta: f64, delta: f64) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::domain("moving-average generator needs delta > 0"));
        }
        let measure = DelayMeasure::Uniform;
        let m = measure.clone();
        Ok(GeneratorSpec {
            name: format!("moving_average(beta={beta},delta={delta})"),
            lip_yz: 0.0,
            lip_delay: beta * beta,
            growth_m: 0.0,
            growth_p: 1.0,
            delta,
            measure,
            eval: Arc::new(move |_t, _x, _y, _z, y_hat| {
                let seg = y_hat.expect("moving-average generator needs a delayed segment");
                let w = m.weights(seg.n_nodes()).expect("segment nodes fixed by delta");
                beta * seg.integrate(&w)
            }),
        })
    }

    /// Lagged generator `kappa * yhat(-delta)`, Dirac delay measure.
    pub fn lagged(kappa: f64, delta: f64) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::domain("lagged generator needs delta > 0"));
        }
        Ok(GeneratorSpec {
            name: format!("lagged(kappa={kappa},delta={delta})"),
            lip_yz: 0.0,
            lip_delay: kappa * kappa,
            growth_m: 0.0,
            growth_p: 1.0,
            delta,
            measure: DelayMeasure::DiracAtDelay,
            eval: Arc::new(move |_t, _x, _y, _z, y_hat| {
                let seg = y_hat.expect("lagged generator needs a delayed segment");
                kappa * seg.at_full_lag()
            }),
        })
    }

    /// Weighted-linear generator `int_{-delta}^0 g(t + theta) yhat(theta) alpha(dtheta)`
    /// with `g(s) = 0` for `s < 0` and `K = sup |g|^2`.
    pub fn weighted_linear(
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        g_sup: f64,
        measure: DelayMeasure,
        delta: f64,
    ) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::domain("weighted-linear generator needs delta > 0"));
        }
        let m = measure.clone();
        Ok(GeneratorSpec {
            name: format!("weighted_linear(delta={delta})"),
            lip_yz: 0.0,
            lip_delay: g_sup * g_sup,
            growth_m: 0.0,
            growth_p: 1.0,
            delta,
            measure,
            eval: Arc::new(move |t, _x, _y, _z, y_hat| {
                let seg = y_hat.expect("weighted-linear generator needs a delayed segment");
                let w = m.weights(seg.n_nodes()).expect("segment nodes fixed by delta");
                (0..seg.n_nodes())
                    .map(|j| {
                        let s = t + seg.offset(j);
                        let gv = if s < 0.0 { 0.0 } else { g(s) };
                        w[j] * gv * seg.values()[j]
                    })
                    .sum()
            }),
        })
    }

    /// Markovian (zero-delay) generator `f(t, phi, y, z)`; ignores the
    /// delayed segment, `K = 0`.
    pub fn markovian(
        name: impl Into<String>,
        lip_yz: f64,
        f: Arc<dyn Fn(f64, &PathSlice, f64, &[f64]) -> f64 + Send + Sync>,
    ) -> Self {
        GeneratorSpec {
            name: name.into(),
            lip_yz,
            lip_delay: 0.0,
            growth_m: 0.0,
            growth_p: 1.0,
            delta: 0.0,
            measure: DelayMeasure::DiracAtDelay,
            eval: Arc::new(move |t, x, y, z, _y_hat| f(t, x, y, z)),
        }
    }

    /// The zero generator.
    pub fn zero() -> Self {
        GeneratorSpec::markovian("zero", 0.0, Arc::new(|_t, _x, _y, _z| 0.0))
    }

    /// Linear discounting generator `-r y`.
    pub fn discounting(r: f64) -> Self {
        GeneratorSpec::markovian(
            format!("discounting(r={r})"),
            r.abs(),
            Arc::new(move |_t, _x, y, _z| -r * y),
        )
    }
}

/// Outcome of evaluating the contraction condition
/// `K gamma e^{(gamma + 6 L^2 / gamma) delta} / ((1 - gamma) L^2) max(1, T) < 1/290`.
#[derive(Debug, Clone, Copy)]
pub struct ContractionReport {
    pub lhs: f64,
    pub threshold: f64,
    pub gamma_star: f64,
    pub satisfied: bool,
    pub margin: f64,
}

/// The contraction-condition expression at a fixed `gamma`.
pub fn contraction_lhs(k: f64, l: f64, delta: f64, horizon: f64, gamma: f64) -> f64 {
    if k == 0.0 {
        // the delay constant multiplies the whole expression; returning 0
        // directly avoids the 0 * inf = NaN trap when the exponential
        // overflows for large L^2 delta / gamma
        return 0.0;
    }
    k * gamma * ((gamma + 6.0 * l * l / gamma) * delta).exp() / ((1.0 - gamma) * l * l)
        * horizon.max(1.0)
}

/// Evaluate the contraction condition for the delay constant `K`,
/// Lipschitz constant `L > 0`, delay `delta` and horizon `T`.
///
/// When `gamma` is omitted the expression is minimized over a gamma grid
/// of resolution 1e-3 and the minimizer is reported.
pub fn check_contraction(
    k: f64,
    l: f64,
    delta: f64,
    horizon: f64,
    gamma: Option<f64>,
) -> Result<ContractionReport> {
    if k < 0.0 {
        return Err(Error::domain("contraction check needs K >= 0"));
    }
    if l <= 0.0 {
        return Err(Error::domain("contraction check needs L > 0"));
    }
    if delta < 0.0 || horizon <= 0.0 {
        return Err(Error::domain("contraction check needs delta >= 0 and T > 0"));
    }
    let (lhs, gamma_star) = match gamma {
        Some(g) => {
            if !(0.0 < g && g < 1.0) {
                return Err(Error::domain(format!("gamma must lie in (0, 1), got {g}")));
            }
            (contraction_lhs(k, l, delta, horizon, g), g)
        }
        None => {
            let mut best = (f64::INFINITY, 0.5);
            for i in 1..1000 {
                let g = i as f64 * 1e-3;
                let v = contraction_lhs(k, l, delta, horizon, g);
                if v < best.0 {
                    best = (v, g);
                }
            }
            best
        }
    };
    Ok(ContractionReport {
        lhs,
        threshold: CONTRACTION_THRESHOLD,
        gamma_star,
        satisfied: lhs < CONTRACTION_THRESHOLD,
        margin: CONTRACTION_THRESHOLD - lhs,
    })
}

/// Contraction check treating the `(y, z)` Lipschitz constant as a free
/// parameter, as the condition allows: minimizes over both gamma and
/// `L >= l_min`. Used for generators whose own `L` is zero.
pub fn check_contraction_auto(
    k: f64,
    l_min: f64,
    delta: f64,
    horizon: f64,
) -> Result<ContractionReport> {
    if k == 0.0 {
        // any L > 0 gives lhs = 0
        return check_contraction(0.0, l_min.max(1.0), delta.max(0.0), horizon, None);
    }
    if delta == 0.0 {
        // lhs -> 0 as L grows without bound; report a large-L evaluation
        return check_contraction(k, l_min.max(1e6), 0.0, horizon, None);
    }
    let mut best: Option<ContractionReport> = None;
    for i in 1..1000 {
        let g = i as f64 * 1e-3;
        // for fixed gamma, e^{6 L^2 delta / gamma} / L^2 is minimized at
        // L^2 = gamma / (6 delta)
        let l = (g / (6.0 * delta)).sqrt().max(l_min);
        let rep = check_contraction(k, l, delta, horizon, Some(g))?;
        if best.map_or(true, |b| rep.lhs < b.lhs) {
            best = Some(rep);
        }
    }
    Ok(best.expect("gamma grid is non-empty"))
}
