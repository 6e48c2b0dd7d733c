//! Discrete representations of continuous paths, stopped paths, delayed
//! segments and the sup-norm / pseudometric on path space.
//!
//! Continuous paths are represented by uniform-grid samples. Off-grid
//! queries interpolate linearly; the delay offset of a segment is always
//! an integer number of grid steps so that no interpolation happens
//! inside a delayed term.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Uniform time grid on `[t0, T]` with `n_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 || t0 < 0.0 {
            return Err(Error::domain(format!(
                "invalid grid range [{t0}, {t_end}]"
            )));
        }
        let dt = (t_end - t0) / n_steps as f64;
        Ok(TimeGrid {
            t0,
            t_end,
            n_steps,
            dt,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points()).map(move |i| self.time(i))
    }

    /// Grid index of `t`, snapping to the nearest node (with a warning on
    /// stderr when `t` is off-grid). Errors when `t` is outside the range.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.dt.max(1.0);
        if t < self.t0 - tol || t > self.t_end + tol {
            return Err(Error::domain(format!(
                "time {t} outside grid range [{}, {}]",
                self.t0, self.t_end
            )));
        }
        let raw = (t - self.t0) / self.dt;
        let i = (raw.round() as usize).min(self.n_steps);
        if (t - self.time(i)).abs() > tol {
            eprintln!(
                "warning: time {t} is off-grid, snapping to node {} (t = {})",
                i,
                self.time(i)
            );
        }
        Ok(i)
    }

    /// Number of grid steps spanned by the delay `delta`, which must be a
    /// positive integer multiple of `dt`.
    pub fn delay_steps(&self, delta: f64) -> Result<usize> {
        if delta <= 0.0 {
            return Err(Error::domain(format!("delay must be positive, got {delta}")));
        }
        let raw = delta / self.dt;
        let k = raw.round();
        if (raw - k).abs() > 1e-9 * raw.max(1.0) || k < 1.0 {
            return Err(Error::config(format!(
                "delay {} is not an integer multiple of the grid step {}",
                delta, self.dt
            )));
        }
        Ok(k as usize)
    }
}

/// A sampled path on a [`TimeGrid`]: one `dim`-dimensional value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>, // flat, row-major: node index major, coordinate minor
}

impl DiscretePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("path dimension must be at least 1"));
        }
        if values.len() != grid.n_points() * dim {
            return Err(Error::domain(format!(
                "path needs {} values, got {}",
                grid.n_points() * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("path values must be finite"));
        }
        Ok(DiscretePath { grid, dim, values })
    }

    /// Path constant at `value` over the whole grid.
    pub fn constant(grid: TimeGrid, value: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_points() * value.len());
        for _ in 0..grid.n_points() {
            values.extend_from_slice(value);
        }
        Self::new(grid, value.len(), values)
    }

    /// Scalar path sampled from `f` at the grid nodes.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.times().map(f).collect();
        Self::new(grid, 1, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar value at node `i`; the path must be one-dimensional.
    pub fn scalar(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Non-anticipative view of the path up to node `i` inclusive.
    pub fn slice_to(&self, i: usize) -> PathSlice<'_> {
        PathSlice {
            grid: self.grid,
            dim: self.dim,
            values: &self.values[..(i + 1) * self.dim],
        }
    }

    pub fn as_slice(&self) -> PathSlice<'_> {
        self.slice_to(self.grid.n_steps())
    }

    /// The stopped path `phi(. ^ t)`: equal to `self` up to `t`, frozen at
    /// `phi(t)` afterwards.
    pub fn stop(&self, t: f64) -> Result<DiscretePath> {
        let i = self.grid.index_of(t)?;
        Ok(self.stop_at_index(i))
    }

    pub fn stop_at_index(&self, i: usize) -> DiscretePath {
        let mut values = self.values.clone();
        let frozen: Vec<f64> = self.value(i).to_vec();
        for j in (i + 1)..self.grid.n_points() {
            values[j * self.dim..(j + 1) * self.dim].copy_from_slice(&frozen);
        }
        DiscretePath {
            grid: self.grid,
            dim: self.dim,
            values,
        }
    }

    /// `sup_{grid nodes} |phi(r)|` (Euclidean norm per node).
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.n_points())
            .map(|i| euclidean(self.value(i)))
            .fold(0.0, f64::max)
    }

    /// `sup_{grid nodes} |phi(r) - psi(r)|` for paths on the same grid.
    pub fn sup_norm_diff(&self, other: &DiscretePath) -> Result<f64> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::domain("paths do not share a grid"));
        }
        Ok((0..self.grid.n_points())
            .map(|i| {
                self.value(i)
                    .iter()
                    .zip(other.value(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// Pointwise sum `self + eps * bump`.
    pub fn add_scaled(&self, bump: &DiscretePath, eps: f64) -> Result<DiscretePath> {
        if self.grid != bump.grid || self.dim != bump.dim {
            return Err(Error::domain("paths do not share a grid"));
        }
        let values = self
            .values
            .iter()
            .zip(&bump.values)
            .map(|(a, b)| a + eps * b)
            .collect();
        DiscretePath::new(self.grid, self.dim, values)
    }

    /// CSV serialization with header `t,x1,...,xd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.dim {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for i in 0..self.grid.n_points() {
            let _ = write!(out, "{}", self.grid.time(i));
            for v in self.value(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<DiscretePath> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty path CSV".into()))?;
        let dim = header.split(',').count().saturating_sub(1);
        if dim == 0 {
            return Err(Error::Parse("path CSV header needs t,x1,... columns".into()));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "path CSV row {} has {} fields, expected {}",
                    ln + 2,
                    fields.len(),
                    dim + 1
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", ln + 2)))
            };
            times.push(parse(fields[0])?);
            for f in &fields[1..] {
                values.push(parse(f)?);
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse("path CSV needs at least two rows".into()));
        }
        let grid = TimeGrid::new(times[0], *times.last().unwrap(), times.len() - 1)?;
        DiscretePath::new(grid, dim, values)
    }
}

/// Borrowed view of a path truncated at some node: the computational
/// stand-in for a stopped path. Queries past the truncation point clamp
/// to the last available value, so coefficients evaluated through a
/// `PathSlice` are non-anticipative by construction.
#[derive(Debug, Clone, Copy)]
pub struct PathSlice<'a> {
    grid: TimeGrid,
    dim: usize,
    values: &'a [f64],
}

impl<'a> PathSlice<'a> {
    pub fn new(grid: TimeGrid, dim: usize, values: &'a [f64]) -> Self {
        debug_assert!(!values.is_empty() && values.len() % dim == 0);
        PathSlice { grid, dim, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw values of the available nodes (flat, node-major).
    pub fn raw(&self) -> &[f64] {
        self.values
    }

    /// Index of the last available node.
    pub fn last_index(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    /// Value at node `i`, clamped to the last available node.
    pub fn at(&self, i: usize) -> &[f64] {
        let i = i.min(self.last_index());
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scalar_at(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[i.min(self.last_index())]
    }

    pub fn current(&self) -> &[f64] {
        self.at(self.last_index())
    }

    pub fn current_scalar(&self) -> f64 {
        self.scalar_at(self.last_index())
    }

    pub fn initial(&self) -> &[f64] {
        self.at(0)
    }

    /// Running average of the scalar path over the available nodes.
    pub fn running_average(&self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let n = self.last_index() + 1;
        self.values[..n].iter().sum::<f64>() / n as f64
    }

    /// Scalar value `lag_steps` nodes before the current one, clamped at
    /// the start of the grid.
    pub fn lagged_scalar(&self, lag_steps: usize) -> f64 {
        let i = self.last_index().saturating_sub(lag_steps);
        self.scalar_at(i)
    }
}

/// Sampled values of a function on the delay window `[-delta, 0]`.
///
/// Node `j` holds the value at offset `theta_j = -delta + j * dt`; the
/// last node is the value at offset zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    delta: f64,
    dt: f64,
    values: Vec<f64>,
}

impl PathSegment {
    pub fn new(delta: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::domain("segment delay must be positive"));
        }
        let k = (delta / dt).round() as usize;
        if values.len() != k + 1 {
            return Err(Error::domain(format!(
                "segment over [-{delta}, 0] with step {dt} needs {} samples, got {}",
                k + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("segment samples must be finite"));
        }
        Ok(PathSegment { delta, dt, values })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Offset of node `j` in `[-delta, 0]`.
    pub fn offset(&self, j: usize) -> f64 {
        -self.delta + j as f64 * self.dt
    }

    /// Value at offset `-delta`.
    pub fn at_full_lag(&self) -> f64 {
        self.values[0]
    }

    /// Value at offset `0`.
    pub fn at_zero(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Quadrature `sum_j w_j * values_j` against the given weights.
    pub fn integrate(&self, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.values.len());
        self.values
            .iter()
            .zip(weights)
            .map(|(v, w)| v * w)
            .sum()
    }
}

fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The stopped path `phi(. ^ t)` as a free operation.
pub fn stop_path(phi: &DiscretePath, t: f64) -> Result<DiscretePath> {
    phi.stop(t)
}

/// The delayed segment `(y(t + theta))_{theta in [-delta, 0]}` of a scalar
/// path, with constant prolongation `y(t0)` before the start of the grid.
pub fn delayed_segment(y_extended: &DiscretePath, t: f64, delta: f64) -> Result<PathSegment> {
    if y_extended.dim() != 1 {
        return Err(Error::domain("delayed segments are defined for scalar paths"));
    }
    let grid = *y_extended.grid();
    let k = grid.delay_steps(delta)?;
    let i = grid.index_of(t)?;
    let values: Vec<f64> = (0..=k)
        .map(|j| {
            let idx = (i + j).saturating_sub(k); // constant prolongation below t0
            y_extended.scalar(idx)
        })
        .collect();
    PathSegment::new(delta, grid.dt(), values)
}

/// The pseudometric `|t - t'| + sup_r |phi(r ^ t) - phi'(r ^ t')|` on
/// time-path pairs sharing a grid.
pub fn pseudometric(t: f64, phi: &DiscretePath, t2: f64, phi2: &DiscretePath) -> Result<f64> {
    if phi.grid() != phi2.grid() || phi.dim() != phi2.dim() {
        return Err(Error::domain("paths do not share a grid"));
    }
    let stopped = phi.stop(t)?;
    let stopped2 = phi2.stop(t2)?;
    Ok((t - t2).abs() + stopped.sup_norm_diff(&stopped2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn stop_at_horizon_is_identity() {
        let phi = DiscretePath::from_fn(unit_grid(10), |t| t * t).unwrap();
        assert_eq!(phi.stop(1.0).unwrap(), phi);
    }

    #[test]
    fn stop_at_start_freezes_initial_value() {
        let phi = DiscretePath::from_fn(unit_grid(10), |t| 2.0 + t).unwrap();
        let stopped = phi.stop(0.0).unwrap();
        for i in 0..=10 {
            assert_eq!(stopped.scalar(i), 2.0);
        }
    }

    #[test]
    fn stop_linear_path_mid() {
        let phi = DiscretePath::from_fn(unit_grid(10), |t| t).unwrap();
        let stopped = phi.stop(0.5).unwrap();
        for i in 0..=10 {
            let t = 0.1 * i as f64;
            assert!((stopped.scalar(i) - t.min(0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_is_idempotent() {
        let phi = DiscretePath::from_fn(unit_grid(8), |t| (5.0 * t).sin()).unwrap();
        let once = phi.stop(0.5).unwrap();
        let twice = once.stop(0.5).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stop_outside_range_errors() {
        let phi = DiscretePath::from_fn(unit_grid(4), |t| t).unwrap();
        assert!(phi.stop(1.5).is_err());
        assert!(phi.stop(-0.5).is_err());
    }

    #[test]
    fn delayed_segment_constant_path() {
        let y = DiscretePath::constant(unit_grid(10), &[3.5]).unwrap();
        let seg = delayed_segment(&y, 0.5, 0.2).unwrap();
        assert_eq!(seg.values(), &[3.5, 3.5, 3.5]);
    }

    #[test]
    fn delayed_segment_linear_readout() {
        let y = DiscretePath::from_fn(unit_grid(10), |t| t).unwrap();
        let seg = delayed_segment(&y, 0.5, 0.2).unwrap();
        let expect = [0.3, 0.4, 0.5];
        for (a, b) in seg.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delayed_segment_prolongation_before_start() {
        // t = 0.05 is off-grid on a step-0.1 grid; use a finer grid so the
        // prolongation case lands on a node.
        let grid = TimeGrid::new(0.0, 1.0, 20).unwrap(); // dt = 0.05
        let y = DiscretePath::from_fn(grid, |t| 1.0 + t).unwrap();
        let seg = delayed_segment(&y, 0.05, 0.2).unwrap();
        // theta = -0.2, -0.15, -0.1, -0.05, 0 -> times -0.15..0.05, clamped at 0
        let expect = [1.0, 1.0, 1.0, 1.0, 1.05];
        for (a, b) in seg.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delayed_segment_bad_delta() {
        let y = DiscretePath::from_fn(unit_grid(10), |t| t).unwrap();
        assert!(matches!(
            delayed_segment(&y, 0.5, 0.25),
            Err(Error::Config(_))
        ));
        assert!(delayed_segment(&y, 0.5, -0.1).is_err());
    }

    #[test]
    fn sup_norm_examples() {
        let zero = DiscretePath::constant(unit_grid(5), &[0.0]).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let lin = DiscretePath::from_fn(unit_grid(5), |t| t).unwrap();
        assert_eq!(lin.sup_norm(), 1.0);
        let grid = unit_grid(1);
        let pw = DiscretePath::new(grid, 1, vec![-3.0, 2.0]).unwrap();
        assert_eq!(pw.sup_norm(), 3.0);
    }

    #[test]
    fn pseudometric_examples() {
        let phi = DiscretePath::from_fn(unit_grid(10), |t| t).unwrap();
        assert_eq!(pseudometric(0.3, &phi, 0.3, &phi).unwrap(), 0.0);
        // same linear path, t = 0.2 vs 0.3: |dt| + sup |r^0.2 - r^0.3| = 0.1 + 0.1
        let d = pseudometric(0.2, &phi, 0.3, &phi).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        let zero = DiscretePath::constant(unit_grid(10), &[0.0]).unwrap();
        let one = DiscretePath::constant(unit_grid(10), &[1.0]).unwrap();
        assert_eq!(pseudometric(0.5, &zero, 0.5, &one).unwrap(), 1.0);
    }

    #[test]
    fn pseudometric_grid_mismatch() {
        let a = DiscretePath::from_fn(unit_grid(10), |t| t).unwrap();
        let b = DiscretePath::from_fn(unit_grid(20), |t| t).unwrap();
        assert!(pseudometric(0.5, &a, 0.5, &b).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let grid = TimeGrid::new(0.0, 0.5, 5).unwrap();
        let phi = DiscretePath::new(
            grid,
            2,
            (0..12).map(|i| i as f64 * 0.25 - 1.0).collect(),
        )
        .unwrap();
        let text = phi.to_csv();
        assert!(text.starts_with("t,x1,x2\n"));
        let back = DiscretePath::from_csv(&text).unwrap();
        assert_eq!(phi, back);
    }

    #[test]
    fn sup_norm_diff_zero_iff_equal() {
        let a = DiscretePath::from_fn(unit_grid(6), |t| t.cos()).unwrap();
        let b = a.clone();
        assert_eq!(a.sup_norm_diff(&b).unwrap(), 0.0);
        let c = b.add_scaled(&DiscretePath::constant(unit_grid(6), &[1.0]).unwrap(), 1e-3).unwrap();
        assert!(a.sup_norm_diff(&c).unwrap() > 0.0);
    }
}
