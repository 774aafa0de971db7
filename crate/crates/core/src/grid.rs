//! Uniform periodic grids on the torus `(-pi, pi]^d`, grid functions with
//! sup-norm semantics, and the Fourier transform pair behind every semigroup
//! application.
//!
//! Fourier convention: `f(x) = sum_k c_k exp(i k.x)` with `c_k` the
//! unnormalised forward sum divided by `n^d`. Modes along an axis run over
//! `-n/2+1 ..= n/2`; spectra are stored in FFT order (index `m` holds mode `m`
//! for `m <= n/2`, mode `m - n` otherwise), row-major for `d = 2`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::fmt_f64;

pub const MIN_POINTS: usize = 4;
pub const MAX_POINTS: usize = 1 << 16;

/// A point of the torus. For `d = 1` the second coordinate is unused and kept at zero.
pub type TorusPoint = [f64; 2];

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(2 pi i m / n)` for `m in 0..n`, exactly conjugate-symmetric.
    phases: Vec<Complex64>,
}

/// Uniform grid with `n` points per axis on `T^d`, `d` in `{1, 2}`.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    plans: Arc<Plans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl fmt::Display for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T^{} grid with n={}", self.dim, self.n)
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for TorusGrid {}

fn phase_table(n: usize) -> Vec<Complex64> {
    let mut table = vec![Complex64::new(0.0, 0.0); n];
    for (m, slot) in table.iter_mut().enumerate().take(n / 2 + 1) {
        let angle = TAU * m as f64 / n as f64;
        *slot = Complex64::new(angle.cos(), angle.sin());
    }
    table[0] = Complex64::new(1.0, 0.0);
    table[n / 2] = Complex64::new(-1.0, 0.0);
    if n.is_multiple_of(4) {
        table[n / 4] = Complex64::new(0.0, 1.0);
    }
    for m in n / 2 + 1..n {
        table[m] = table[n - m].conj();
    }
    table
}

impl TorusGrid {
    /// Build a grid; `n` must be even and within `[MIN_POINTS, MAX_POINTS]`.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "points per axis must be even, got {n}"
            )));
        }
        if !(MIN_POINTS..=MAX_POINTS).contains(&n) {
            return Err(Error::Config(format!(
                "points per axis must lie in [{MIN_POINTS}, {MAX_POINTS}], got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            phases: phase_table(n),
        };
        Ok(TorusGrid {
            dim,
            n,
            plans: Arc::new(plans),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Coordinate of the `j`-th point along an axis.
    pub fn coord(&self, j: usize) -> f64 {
        -PI + j as f64 * self.spacing()
    }

    /// Per-axis indices of a flat index (`idx = i0 * n + i1` for `d = 2`).
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flat_index(&self, axes: [usize; 2]) -> usize {
        if self.dim == 1 {
            axes[0]
        } else {
            axes[0] * self.n + axes[1]
        }
    }

    pub fn point(&self, idx: usize) -> TorusPoint {
        let [i0, i1] = self.axis_indices(idx);
        if self.dim == 1 {
            [self.coord(i0), 0.0]
        } else {
            [self.coord(i0), self.coord(i1)]
        }
    }

    /// Signed Fourier mode of FFT index `m` along one axis.
    pub fn axis_mode(&self, m: usize) -> i64 {
        if m <= self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Fourier mode vector of a flat spectrum index.
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        let [m0, m1] = self.axis_indices(idx);
        if self.dim == 1 {
            [self.axis_mode(m0), 0]
        } else {
            [self.axis_mode(m0), self.axis_mode(m1)]
        }
    }

    /// Flat spectrum index holding the conjugate partner of `idx`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let [m0, m1] = self.axis_indices(idx);
        let flip = |m: usize| (self.n - m) % self.n;
        if self.dim == 1 {
            flip(m0)
        } else {
            self.flat_index([flip(m0), flip(m1)])
        }
    }

    /// `exp(2 pi i m / n)` from an exactly conjugate-symmetric table.
    pub fn phase(&self, m: i64) -> Complex64 {
        self.plans.phases[m.rem_euclid(self.n as i64) as usize]
    }

    /// Nearest grid index along an axis for a coordinate in any period.
    pub fn nearest_axis_index(&self, x: f64) -> usize {
        let j = ((x + PI) / self.spacing()).round() as i64;
        j.rem_euclid(self.n as i64) as usize
    }

    pub fn nearest_index(&self, p: TorusPoint) -> usize {
        if self.dim == 1 {
            self.nearest_axis_index(p[0])
        } else {
            self.flat_index([self.nearest_axis_index(p[0]), self.nearest_axis_index(p[1])])
        }
    }

    /// Integer lattice offset of the displacement nearest to `y`, and the snapping distance.
    pub fn snap_displacement(&self, y: TorusPoint) -> ([i64; 2], f64) {
        let h = self.spacing();
        let mut offset = [0i64; 2];
        let mut dist2 = 0.0;
        for axis in 0..self.dim {
            let w = wrap(y[axis]);
            let a = (w / h).round();
            let d = w - a * h;
            dist2 += d * d;
            offset[axis] = (a as i64).rem_euclid(self.n as i64);
            if offset[axis] > self.n as i64 / 2 {
                offset[axis] -= self.n as i64;
            }
        }
        (offset, dist2.sqrt())
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    /// In-place unnormalised DFT along every axis.
    pub(crate) fn fft(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.len());
        let plan = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        // rustfft transforms every contiguous chunk of length n, i.e. all rows.
        plan.process(buf);
        if self.dim == 2 {
            let n = self.n;
            transpose(buf, n);
            plan.process(buf);
            transpose(buf, n);
        }
    }

    /// Raw DFT of real samples (no normalisation, grid-origin phase not applied).
    pub(crate) fn raw_forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft(&mut buf, false);
        buf
    }

    /// Inverse of [`raw_forward`](Self::raw_forward); returns the real part and the
    /// largest discarded imaginary component.
    pub(crate) fn raw_inverse_real(&self, mut buf: Vec<Complex64>) -> (Vec<f64>, f64) {
        self.fft(&mut buf, true);
        let scale = 1.0 / self.len() as f64;
        let mut residue: f64 = 0.0;
        let values = buf
            .into_iter()
            .map(|c| {
                residue = residue.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (values, residue)
    }

    /// Sign `(-1)^(m0 + m1)` relating raw DFT bins to coefficients of the
    /// `exp(i k.x)` basis when the grid starts at `-pi`.
    fn origin_sign(&self, idx: usize) -> f64 {
        let [m0, m1] = self.axis_indices(idx);
        if (m0 + m1) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Wrap a coordinate into `(-pi, pi]`.
pub fn wrap(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

pub fn wrap_point(p: TorusPoint) -> TorusPoint {
    [wrap(p[0]), wrap(p[1])]
}

/// Real samples of a function on a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} values supplied for a grid with {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function samples"));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_parts_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values }
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(TorusPoint) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        GridFunction::new(grid.clone(), values)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Result<Self> {
        GridFunction::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    /// `max_j |f_j - g_j|`.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_map(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        GridFunction::new(self.grid.clone(), values)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(
            self.grid.clone(),
            self.values.iter().map(|&v| op(v)).collect(),
        )
    }

    /// Translate by whole grid cells: the result at `x_j` is `f(x_{j + offset})`.
    pub fn cyclic_shift(&self, offset: [i64; 2]) -> GridFunction {
        let n = self.grid.n as i64;
        let values = (0..self.len())
            .map(|idx| {
                let [i0, i1] = self.grid.axis_indices(idx);
                let s0 = (i0 as i64 + offset[0]).rem_euclid(n) as usize;
                let src = if self.grid.dim == 1 {
                    s0
                } else {
                    let s1 = (i1 as i64 + offset[1]).rem_euclid(n) as usize;
                    self.grid.flat_index([s0, s1])
                };
                self.values[src]
            })
            .collect();
        GridFunction::from_parts_unchecked(self.grid.clone(), values)
    }

    /// Periodic (bi)linear interpolation at an arbitrary torus point.
    pub fn interpolate(&self, p: TorusPoint) -> f64 {
        let h = self.grid.spacing();
        let n = self.grid.n;
        let locate = |x: f64| {
            let u = (x + PI).rem_euclid(TAU) / h;
            let j = (u.floor() as usize).min(n - 1);
            (j, (j + 1) % n, u - j as f64)
        };
        let (a0, b0, w0) = locate(p[0]);
        if self.grid.dim == 1 {
            return self.values[a0] * (1.0 - w0) + self.values[b0] * w0;
        }
        let (a1, b1, w1) = locate(p[1]);
        let at = |i: usize, j: usize| self.values[self.grid.flat_index([i, j])];
        (1.0 - w0) * ((1.0 - w1) * at(a0, a1) + w1 * at(a0, b1))
            + w0 * ((1.0 - w1) * at(b0, a1) + w1 * at(b0, b1))
    }

    /// CSV with header `index,x[,y],value`, one row per grid point in flat order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.grid.dim == 1 {
            writeln!(out, "index,x,value")?;
        } else {
            writeln!(out, "index,x,y,value")?;
        }
        for (idx, v) in self.values.iter().enumerate() {
            let p = self.grid.point(idx);
            if self.grid.dim == 1 {
                writeln!(out, "{idx},{},{}", fmt_f64(p[0]), fmt_f64(*v))?;
            } else {
                writeln!(
                    out,
                    "{idx},{},{},{}",
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                    fmt_f64(*v)
                )?;
            }
        }
        Ok(())
    }

    /// Parse the CSV produced by [`write_csv`](Self::write_csv); coordinates are
    /// checked against `grid`.
    pub fn read_csv<R: BufRead>(grid: &TorusGrid, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sample file".into()))??;
        let expected = if grid.dim == 1 {
            "index,x,value"
        } else {
            "index,x,y,value"
        };
        if header.trim() != expected {
            return Err(Error::Parse(format!(
                "expected header `{expected}`, found `{}`",
                header.trim()
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != grid.dim + 2 {
                return Err(Error::Parse(format!(
                    "row {row}: expected {} fields",
                    grid.dim + 2
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: {e}")))
            };
            let idx: usize = fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {row}: bad index: {e}")))?;
            if idx != values.len() || idx >= grid.len() {
                return Err(Error::Parse(format!(
                    "row {row}: index {idx} out of sequence"
                )));
            }
            let p = grid.point(idx);
            for axis in 0..grid.dim {
                let x = parse(fields[1 + axis])?;
                if (wrap(x) - wrap(p[axis])).abs() > 1e-6 {
                    return Err(Error::Parse(format!(
                        "row {row}: coordinate {x} does not match grid point {}",
                        p[axis]
                    )));
                }
            }
            values.push(parse(fields[grid.dim + 1])?);
        }
        if values.len() != grid.len() {
            return Err(Error::Parse(format!(
                "expected {} rows, found {}",
                grid.len(),
                values.len()
            )));
        }
        GridFunction::new(grid.clone(), values)
    }
}

/// Componentwise maximum of a nonempty list of functions on a common grid.
pub fn pointwise_max(fs: &[GridFunction]) -> Result<GridFunction> {
    let (first, rest) = fs
        .split_first()
        .ok_or_else(|| Error::Precondition("pointwise_max of an empty list".into()))?;
    let mut values = first.values.clone();
    for g in rest {
        first.grid.check_same(&g.grid)?;
        for (m, &v) in values.iter_mut().zip(&g.values) {
            if v > *m {
                *m = v;
            }
        }
    }
    Ok(GridFunction::from_parts_unchecked(
        first.grid.clone(),
        values,
    ))
}

/// Fourier coefficients `c_k` of a grid function, stored in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} coefficients for a grid with {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of mode `k` (each component taken modulo `n`).
    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        let n = self.grid.n as i64;
        let m0 = k[0].rem_euclid(n) as usize;
        let idx = if self.grid.dim == 1 {
            m0
        } else {
            self.grid.flat_index([m0, k[1].rem_euclid(n) as usize])
        };
        self.coeffs[idx]
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.conjugate_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }
}

pub fn forward_transform(f: &GridFunction) -> Spectrum {
    let grid = f.grid.clone();
    let scale = 1.0 / grid.len() as f64;
    let mut coeffs = grid.raw_forward(&f.values);
    for (idx, c) in coeffs.iter_mut().enumerate() {
        *c *= grid.origin_sign(idx) * scale;
    }
    Spectrum { grid, coeffs }
}

/// Inverse transform; fails if the synthesised function is not real to
/// `1e-10 * (1 + max |c_k|)`.
pub fn inverse_transform(s: &Spectrum) -> Result<GridFunction> {
    let grid = s.grid.clone();
    let total = grid.len() as f64;
    let buf: Vec<Complex64> = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| c * grid.origin_sign(idx) * total)
        .collect();
    let (values, residue) = grid.raw_inverse_real(buf);
    let scale = s.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let tolerance = 1e-10 * (1.0 + scale);
    if residue > tolerance {
        return Err(Error::ImaginaryResidue { residue, tolerance });
    }
    GridFunction::new(grid, values)
}

/// Named initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialFunction {
    /// `amplitude * cos(k.x + phase)`.
    Cosine {
        k: Vec<i64>,
        #[serde(default)]
        phase: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// Raised cosine `(1 + cos(pi d / width)) / 2` of the periodised distance `d`
    /// to `center`, zero for `d > width`.
    Bump {
        center: Vec<f64>,
        width: f64,
    },
    Constant {
        value: f64,
    },
    /// Samples in the grid-function CSV format.
    File {
        path: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}

fn periodic_distance(p: TorusPoint, c: TorusPoint, dim: usize) -> f64 {
    (0..dim)
        .map(|a| {
            let d = wrap(p[a] - c[a]);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn as_point(v: &[f64], dim: usize, what: &str) -> Result<TorusPoint> {
    if v.len() != dim {
        return Err(Error::Config(format!(
            "{what} has {} components, grid dimension is {dim}",
            v.len()
        )));
    }
    let mut p = [0.0; 2];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

/// Evaluate a named initial function at the grid points.
pub fn sample(grid: &TorusGrid, init: &InitialFunction) -> Result<GridFunction> {
    let dim = grid.dim();
    match init {
        InitialFunction::Cosine {
            k,
            phase,
            amplitude,
        } => {
            if k.len() != dim {
                return Err(Error::Config(format!(
                    "cosine wave vector has {} components, grid dimension is {dim}",
                    k.len()
                )));
            }
            let kv = [k[0] as f64, k.get(1).copied().unwrap_or(0) as f64];
            GridFunction::from_fn(grid, |p| {
                amplitude * (kv[0] * p[0] + kv[1] * p[1] + phase).cos()
            })
        }
        InitialFunction::Bump { center, width } => {
            if !(width.is_finite() && *width > 0.0) {
                return Err(Error::Config(format!(
                    "bump width must be positive, got {width}"
                )));
            }
            let c = as_point(center, dim, "bump center")?;
            GridFunction::from_fn(grid, |p| {
                let d = periodic_distance(p, c, dim);
                if d <= *width {
                    0.5 * (1.0 + (PI * d / width).cos())
                } else {
                    0.0
                }
            })
        }
        InitialFunction::Constant { value } => GridFunction::constant(grid, *value),
        InitialFunction::File { path } => {
            let file = std::fs::File::open(path)?;
            GridFunction::read_csv(grid, std::io::BufReader::new(file))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(grid: &TorusGrid, k: i64) -> GridFunction {
        sample(
            grid,
            &InitialFunction::Cosine {
                k: vec![k],
                phase: 0.0,
                amplitude: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = TorusGrid::new(1, 8).unwrap();
        assert_eq!(g.len(), 8);
        for j in 0..8 {
            assert!((g.coord(j) - (-PI + j as f64 * PI / 4.0)).abs() < 1e-15);
        }
        let g2 = TorusGrid::new(2, 64).unwrap();
        assert_eq!(g2.len(), 4096);
        assert!((g2.spacing() - PI / 32.0).abs() < 1e-15);
        assert!((g2.spacing() * 64.0 - TAU).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(TorusGrid::new(1, 3), Err(Error::Config(_))));
        assert!(TorusGrid::new(3, 8).is_err());
        assert!(TorusGrid::new(0, 8).is_err());
        assert!(TorusGrid::new(1, 2).is_err());
        assert!(TorusGrid::new(1, MAX_POINTS + 2).is_err());
    }

    #[test]
    fn mode_range_and_conjugates() {
        let g = TorusGrid::new(1, 8).unwrap();
        let modes: Vec<i64> = (0..8).map(|i| g.mode(i)[0]).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.conjugate_index(4), 4);
        assert_eq!(g.conjugate_index(1), 7);
        for m in 0..8 {
            assert_eq!(g.phase(m), g.phase(-m).conj());
        }
        assert_eq!(g.phase(4), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn sampling_builtins() {
        let g = TorusGrid::new(1, 8).unwrap();
        let c = cosine(&g, 1);
        for j in 0..8 {
            assert!((c.values()[j] - g.coord(j).cos()).abs() < 1e-15);
        }
        let k = sample(&g, &InitialFunction::Constant { value: 3.5 }).unwrap();
        assert!(k.values().iter().all(|&v| v == 3.5));

        let g = TorusGrid::new(1, 64).unwrap();
        let bump = sample(
            &g,
            &InitialFunction::Bump {
                center: vec![0.0],
                width: PI / 2.0,
            },
        )
        .unwrap();
        assert!(bump.min_value() >= 0.0);
        assert_eq!(bump.values()[32], 1.0);
        for j in 0..64 {
            if g.coord(j).abs() >= PI / 2.0 {
                assert!(bump.values()[j].abs() < 1e-15);
            }
        }
        assert!(sample(
            &g,
            &InitialFunction::Bump {
                center: vec![0.0],
                width: 0.0
            }
        )
        .is_err());
        assert!(sample(
            &g,
            &InitialFunction::Cosine {
                k: vec![1, 1],
                phase: 0.0,
                amplitude: 1.0
            }
        )
        .is_err());
    }

    #[test]
    fn cosine_and_constant_spectra() {
        let g = TorusGrid::new(1, 8).unwrap();
        let s = forward_transform(&cosine(&g, 1));
        for m in 0..8 {
            let k = g.mode(m);
            let expected = if k[0].abs() == 1 { 0.5 } else { 0.0 };
            assert!(
                (s.coeff(k) - Complex64::new(expected, 0.0)).norm() < 1e-15,
                "mode {k:?}"
            );
        }
        let one = GridFunction::constant(&g, 1.0).unwrap();
        let s = forward_transform(&one);
        assert!((s.coeff([0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(s.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn sine_has_imaginary_coefficients() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = GridFunction::from_fn(&g, |p| (2.0 * p[0] - p[1]).sin()).unwrap();
        let s = forward_transform(&f);
        // sin(u) = (e^{iu} - e^{-iu}) / 2i
        assert!((s.coeff([2, -1]) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((s.coeff([-2, 1]) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        assert!(s.conjugate_asymmetry() < 1e-15);
        let back = inverse_transform(&s).unwrap();
        assert!(back.sup_distance(&f).unwrap() < 1e-14);
    }

    #[test]
    fn inverse_rejects_non_real_spectrum() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 8];
        coeffs[1] = Complex64::new(1.0, 0.0);
        let s = Spectrum::new(g, coeffs).unwrap();
        assert!(matches!(
            inverse_transform(&s),
            Err(Error::ImaginaryResidue { .. })
        ));
    }

    #[test]
    fn sup_distance_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let c = cosine(&g, 1);
        assert_eq!(c.sup_distance(&c).unwrap(), 0.0);
        let two = GridFunction::constant(&g, 2.0).unwrap();
        let five = GridFunction::constant(&g, 5.0).unwrap();
        assert_eq!(two.sup_distance(&five).unwrap(), 3.0);
        let neg = c.map(|v| -v).unwrap();
        assert_eq!(c.sup_distance(&neg).unwrap(), 2.0);
        let other = GridFunction::constant(&TorusGrid::new(1, 8).unwrap(), 0.0).unwrap();
        assert!(matches!(
            c.sup_distance(&other),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn pointwise_max_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let c = cosine(&g, 1);
        assert_eq!(pointwise_max(std::slice::from_ref(&c)).unwrap(), c);
        let neg = c.map(|v| -v).unwrap();
        let m = pointwise_max(&[c.clone(), neg]).unwrap();
        assert_eq!(m, c.map(f64::abs).unwrap());
        let one = GridFunction::constant(&g, 1.0).unwrap();
        let two = GridFunction::constant(&g, 2.0).unwrap();
        assert_eq!(pointwise_max(&[one, two.clone()]).unwrap(), two);
        assert!(pointwise_max(&[]).is_err());
    }

    #[test]
    fn cyclic_shift_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let c = cosine(&g, 1);
        assert_eq!(c.cyclic_shift([0, 0]), c);
        assert_eq!(c.cyclic_shift([16, 0]), c);
        let half = c.cyclic_shift([8, 0]);
        let neg = c.map(|v| -v).unwrap();
        assert!(half.sup_distance(&neg).unwrap() < 1e-15);

        let g2 = TorusGrid::new(2, 8).unwrap();
        let f = GridFunction::from_fn(&g2, |p| p[0] + 10.0 * p[1]).unwrap();
        let s = f.cyclic_shift([1, -1]);
        assert_eq!(
            s.values()[g2.flat_index([0, 1])],
            f.values()[g2.flat_index([1, 0])]
        );
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let g = TorusGrid::new(1, 16).unwrap();
        let c = cosine(&g, 1);
        for j in 0..16 {
            assert!((c.interpolate([g.coord(j), 0.0]) - c.values()[j]).abs() < 1e-15);
        }
        let mid = 0.5 * (g.coord(15) + PI);
        let expected = 0.5 * (c.values()[15] + c.values()[0]);
        assert!((c.interpolate([mid, 0.0]) - expected).abs() < 1e-14);

        let g2 = TorusGrid::new(2, 8).unwrap();
        let f = GridFunction::from_fn(&g2, |p| p[0].cos() * p[1].sin()).unwrap();
        let p = g2.point(g2.flat_index([3, 5]));
        assert!((f.interpolate(p) - f.values()[g2.flat_index([3, 5])]).abs() < 1e-15);
    }

    #[test]
    fn wrap_maps_into_half_open_interval() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(0.5 + TAU) - 0.5).abs() < 1e-12);
        assert!(wrap(-0.25) == -0.25);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = GridFunction::from_fn(&g, |p| (p[0] - 0.3 * p[1]).sin() / 3.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,x,y,value\n"));
        let back = GridFunction::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, f);

        let g1 = TorusGrid::new(1, 4).unwrap();
        assert!(GridFunction::read_csv(&g1, buf.as_slice()).is_err());
        let short = "index,x,value\n0,-3.14159265358979,1.0\n";
        assert!(matches!(
            GridFunction::read_csv(&g1, short.as_bytes()),
            Err(Error::Parse(_))
        ));
    }
}
