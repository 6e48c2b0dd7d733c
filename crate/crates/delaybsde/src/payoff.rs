//! Terminal payoff functionals on path space, with growth metadata.

use std::sync::Arc;

use crate::paths::PathSlice;

/// Terminal condition `h(phi)` with growth metadata
/// `|h(phi)| <= growth_m (1 + ||phi||^growth_p)`.
#[derive(Clone)]
pub struct Payoff {
    pub name: String,
    pub growth_m: f64,
    pub growth_p: f64,
    eval: Arc<dyn Fn(&PathSlice) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Payoff").field("name", &self.name).finish()
    }
}

impl Payoff {
    pub fn new(
        name: impl Into<String>,
        growth_m: f64,
        growth_p: f64,
        eval: Arc<dyn Fn(&PathSlice) -> f64 + Send + Sync>,
    ) -> Self {
        Payoff {
            name: name.into(),
            growth_m,
            growth_p,
            eval,
        }
    }

    pub fn eval(&self, path: &PathSlice) -> f64 {
        (self.eval)(path)
    }

    /// Constant payoff `c`.
    pub fn constant(c: f64) -> Self {
        Payoff::new(format!("constant({c})"), c.abs(), 1.0, Arc::new(move |_| c))
    }

    /// Terminal state `phi(T)` (first coordinate).
    pub fn terminal_value() -> Self {
        Payoff::new(
            "terminal_value",
            1.0,
            1.0,
            Arc::new(|p: &PathSlice| p.current()[0]),
        )
    }

    /// European call `(phi(T) - strike)^+`.
    pub fn call(strike: f64) -> Self {
        Payoff::new(
            format!("call(strike={strike})"),
            strike.abs().max(1.0),
            1.0,
            Arc::new(move |p: &PathSlice| (p.current()[0] - strike).max(0.0)),
        )
    }

    /// European put `(strike - phi(T))^+`.
    pub fn put(strike: f64) -> Self {
        Payoff::new(
            format!("put(strike={strike})"),
            strike.abs().max(1.0),
            1.0,
            Arc::new(move |p: &PathSlice| (strike - p.current()[0]).max(0.0)),
        )
    }

    /// Asian-style payoff on the running average: `(avg - strike)^+`.
    pub fn average_call(strike: f64) -> Self {
        Payoff::new(
            format!("average_call(strike={strike})"),
            strike.abs().max(1.0),
            1.0,
            Arc::new(move |p: &PathSlice| (p.running_average() - strike).max(0.0)),
        )
    }
}
