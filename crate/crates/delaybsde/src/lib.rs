//! Solvers for decoupled forward-backward systems whose backward equation
//! carries a time-delayed generator, with the pricing and risk-measure
//! applications built on top.
//!
//! The crate is organised bottom-up: path-space primitives (`paths`),
//! deterministic counter-based noise (`rng`), the forward Euler scheme
//! (`forward`), delayed generator specifications and the contraction
//! condition (`generators`), the regression machinery (`regression`), the
//! Picard-wrapped backward solver (`bsde`), the value functional and its
//! consistency checks (`feynman_kac`), financial applications (`finance`)
//! and the independent validation oracles (`oracles`).

pub mod bsde;
pub mod config;
pub mod error;
pub mod feynman_kac;
pub mod finance;
pub mod forward;
pub mod generators;
pub mod oracles;
pub mod paths;
pub mod payoff;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
