//! Least-squares conditional expectation machinery for the regression
//! Monte Carlo scheme: non-anticipative feature bases, the normal-equation
//! solver with ridge fallback, and the exact-conditioning (indicator) mode
//! used against the scenario-tree oracle.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::paths::PathSlice;

/// Condition-number limit of the (possibly ridged) normal equations.
pub const MAX_CONDITION: f64 = 1e12;

/// Feature basis for the per-step least-squares projections. All bases
/// depend on the path only up to the current step.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionBasis {
    /// `1, x, x^2, ..., x^degree` per state coordinate.
    Polynomial { degree: usize },
    /// State and running average: `1, x, a, x^2, a^2, x a`.
    StateRunningAverage,
    /// State and lagged state: `1, x, xl, x^2, xl^2, x xl`.
    StateLagged { lag_steps: usize },
    /// Exact conditioning on the discrete path history (tree-oracle mode):
    /// the projection is the groupwise mean over samples sharing the same
    /// path prefix.
    IndicatorExact,
}

impl RegressionBasis {
    /// Number of features for a `dim`-dimensional state.
    pub fn n_features(&self, dim: usize) -> usize {
        match self {
            RegressionBasis::Polynomial { degree } => 1 + degree * dim,
            RegressionBasis::StateRunningAverage | RegressionBasis::StateLagged { .. } => 6,
            RegressionBasis::IndicatorExact => 0,
        }
    }

    /// Write the feature vector of a stopped path into `out`.
    pub fn features(&self, slice: &PathSlice, out: &mut [f64]) {
        match self {
            RegressionBasis::Polynomial { degree } => {
                out[0] = 1.0;
                let x = slice.current();
                let mut k = 1;
                for &xi in x {
                    let mut p = xi;
                    for _ in 0..*degree {
                        out[k] = p;
                        p *= xi;
                        k += 1;
                    }
                }
            }
            RegressionBasis::StateRunningAverage => {
                let x = slice.current_scalar();
                let a = slice.running_average();
                out.copy_from_slice(&[1.0, x, a, x * x, a * a, x * a]);
            }
            RegressionBasis::StateLagged { lag_steps } => {
                let x = slice.current_scalar();
                let xl = slice.lagged_scalar(*lag_steps);
                out.copy_from_slice(&[1.0, x, xl, x * x, xl * xl, x * xl]);
            }
            RegressionBasis::IndicatorExact => unreachable!("indicator basis has no features"),
        }
    }
}

/// Per-step design: either a dense feature matrix or the exact grouping
/// by path prefix.
pub enum StepDesign {
    Linear {
        q: usize,
        /// `n_samples x q`, row-major.
        feats: Vec<f64>,
    },
    Groups {
        /// Group id per sample and the number of groups.
        ids: Vec<u32>,
        keys: Vec<Vec<u8>>,
        n_groups: usize,
    },
}

impl StepDesign {
    pub fn n_samples(&self) -> usize {
        match self {
            StepDesign::Linear { q, feats } => feats.len() / q,
            StepDesign::Groups { ids, .. } => ids.len(),
        }
    }
}

fn prefix_key(slice: &PathSlice) -> Vec<u8> {
    let raw = slice.raw();
    let mut key = Vec::with_capacity(raw.len() * 8);
    for v in raw {
        key.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    key
}

/// Build the design for one step from the per-sample stopped paths.
pub fn build_design<'a>(
    basis: &RegressionBasis,
    n_samples: usize,
    dim: usize,
    slice_of: impl Fn(usize) -> PathSlice<'a> + Sync,
) -> StepDesign {
    match basis {
        RegressionBasis::IndicatorExact => {
            let mut ids = vec![0u32; n_samples];
            let mut keys: Vec<Vec<u8>> = Vec::new();
            let mut map: HashMap<Vec<u8>, u32> = HashMap::new();
            for m in 0..n_samples {
                let key = prefix_key(&slice_of(m));
                let next = map.len() as u32;
                let id = *map.entry(key.clone()).or_insert_with(|| {
                    keys.push(key);
                    next
                });
                ids[m] = id;
            }
            let n_groups = map.len();
            StepDesign::Groups { ids, keys, n_groups }
        }
        _ => {
            let q = basis.n_features(dim);
            let mut feats = vec![0.0; n_samples * q];
            use rayon::prelude::*;
            feats
                .par_chunks_mut(q)
                .enumerate()
                .for_each(|(m, row)| basis.features(&slice_of(m), row));
            StepDesign::Linear { q, feats }
        }
    }
}

/// Frozen per-step surrogate of a conditional expectation, evaluable on
/// fresh paths.
#[derive(Debug, Clone)]
pub enum StepSurrogate {
    Constant { value: f64 },
    Linear {
        basis: RegressionBasis,
        coeffs: Vec<f64>,
    },
    Lookup {
        table: HashMap<Vec<u8>, f64>,
    },
}

impl StepSurrogate {
    /// Evaluate on a stopped path. Lookup surrogates error on unseen
    /// histories.
    pub fn eval(&self, slice: &PathSlice) -> Result<f64> {
        match self {
            StepSurrogate::Constant { value } => Ok(*value),
            StepSurrogate::Linear { basis, coeffs } => {
                let mut f = vec![0.0; coeffs.len()];
                basis.features(slice, &mut f);
                Ok(f.iter().zip(coeffs).map(|(a, b)| a * b).sum())
            }
            StepSurrogate::Lookup { table } => table
                .get(&prefix_key(slice))
                .copied()
                .ok_or_else(|| Error::State("path history not present in the exact-conditioning table".into())),
        }
    }
}

/// Least-squares projection of `targets` onto the design. Returns the
/// fitted per-sample values and a frozen surrogate.
///
/// For the linear design this solves the normal equations, adding a ridge
/// `1e-10 trace / q` when the Gram matrix is ill-conditioned; if the
/// condition number still exceeds [`MAX_CONDITION`] the step errors out.
pub fn project(design: &StepDesign, targets: &[f64], step: usize) -> Result<(Vec<f64>, StepSurrogate)> {
    match design {
        StepDesign::Groups { ids, keys, n_groups } => {
            let mut sums = vec![0.0; *n_groups];
            let mut counts = vec![0usize; *n_groups];
            for (m, &id) in ids.iter().enumerate() {
                sums[id as usize] += targets[m];
                counts[id as usize] += 1;
            }
            let means: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(s, c)| s / *c as f64)
                .collect();
            let fitted: Vec<f64> = ids.iter().map(|&id| means[id as usize]).collect();
            let table: HashMap<Vec<u8>, f64> = keys
                .iter()
                .cloned()
                .zip(means.iter().copied())
                .collect();
            Ok((fitted, StepSurrogate::Lookup { table }))
        }
        StepDesign::Linear { q, feats } => {
            let q = *q;
            let n = feats.len() / q;
            debug_assert_eq!(targets.len(), n);
            // Gram matrix and right-hand side, accumulated sequentially so
            // results do not depend on the thread count.
            let mut gram = DMatrix::<f64>::zeros(q, q);
            let mut rhs = DVector::<f64>::zeros(q);
            for m in 0..n {
                let row = &feats[m * q..(m + 1) * q];
                for a in 0..q {
                    rhs[a] += row[a] * targets[m];
                    for b in a..q {
                        gram[(a, b)] += row[a] * row[b];
                    }
                }
            }
            for a in 0..q {
                for b in 0..a {
                    gram[(a, b)] = gram[(b, a)];
                }
            }
            // equilibrate the columns (features like 1, x, x^2 differ by
            // orders of magnitude in scale, which would otherwise burn
            // most of the double precision in the normal equations)
            let scale: Vec<f64> = (0..q)
                .map(|a| {
                    let d = (gram[(a, a)] / n as f64).sqrt();
                    if d > 0.0 { 1.0 / d } else { 1.0 }
                })
                .collect();
            for a in 0..q {
                rhs[a] *= scale[a];
                for b in 0..q {
                    gram[(a, b)] *= scale[a] * scale[b];
                }
            }
            let mut coeffs = solve_spd(gram, rhs, step)?;
            for a in 0..q {
                coeffs[a] *= scale[a];
            }
            let fitted: Vec<f64> = (0..n)
                .map(|m| {
                    feats[m * q..(m + 1) * q]
                        .iter()
                        .zip(coeffs.iter())
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect();
            // reconstruct the basis from q is ambiguous; the caller stores
            // the basis when freezing surrogates (see `project_with_basis`).
            Ok((
                fitted,
                StepSurrogate::Linear {
                    basis: RegressionBasis::Polynomial { degree: 0 },
                    coeffs: coeffs.iter().copied().collect(),
                },
            ))
        }
    }
}

/// [`project`] that also stamps the basis into the frozen surrogate.
pub fn project_with_basis(
    design: &StepDesign,
    basis: &RegressionBasis,
    targets: &[f64],
    step: usize,
) -> Result<(Vec<f64>, StepSurrogate)> {
    let (fitted, surrogate) = project(design, targets, step)?;
    let surrogate = match surrogate {
        StepSurrogate::Linear { coeffs, .. } => StepSurrogate::Linear {
            basis: basis.clone(),
            coeffs,
        },
        other => other,
    };
    Ok((fitted, surrogate))
}

fn solve_spd(mut gram: DMatrix<f64>, rhs: DVector<f64>, step: usize) -> Result<DVector<f64>> {
    let q = gram.nrows();
    let cond_of = |m: &DMatrix<f64>| -> (f64, nalgebra::SymmetricEigen<f64, nalgebra::Dyn>) {
        let eig = m.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let min = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, |a, b| a.min(b.abs()));
        (if min > 0.0 { max / min } else { f64::INFINITY }, eig)
    };
    let (mut cond, mut eig) = cond_of(&gram);
    if cond > MAX_CONDITION {
        let ridge = 1e-10 * gram.trace() / q as f64;
        for a in 0..q {
            gram[(a, a)] += ridge;
        }
        let (c, e) = cond_of(&gram);
        cond = c;
        eig = e;
        if cond > MAX_CONDITION {
            return Err(Error::IllConditionedRegression { step, cond });
        }
    }
    // solve via the eigendecomposition already at hand
    let ut_b = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        q,
        ut_b.iter().zip(eig.eigenvalues.iter()).map(|(v, l)| v / l),
    );
    Ok(&eig.eigenvectors * scaled)
}
