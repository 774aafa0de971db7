//! Reference computations that do not go through the envelope composition:
//! the compound-Poisson series, an RK4 integration of `u' = sup_lambda A_lambda u`,
//! the PDE residual of a trajectory, and an escaped-mass diagnostic for
//! problems embedded from the real line into a large torus.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::levy::{apply_linear, JumpAtom, SymbolTable};
use crate::nisio::generator_sup;
use crate::table::fmt_f64;

/// Default truncation tolerance of [`poisson_series_apply`].
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Largest number of series terms before giving up.
pub const SERIES_BUDGET: usize = 10_000;
/// Atoms further than this from a grid displacement are rejected.
const ON_GRID_TOL: f64 = 1e-9;
/// Growth allowed for the RK4 amplification factor on any mode.
const AMPLIFICATION_TOL: f64 = 1e-12;

/// A time-indexed sequence of grid functions starting at `t = 0`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    snapshots: Vec<GridFunction>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, snapshots: Vec<GridFunction>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::Precondition(format!(
                "trajectory needs matching nonempty times/snapshots, got {} and {}",
                times.len(),
                snapshots.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::Precondition(
                "trajectory times must start at 0 and increase".into(),
            ));
        }
        for s in &snapshots[1..] {
            snapshots[0].grid().check_same(s.grid())?;
        }
        Ok(Trajectory { times, snapshots })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[GridFunction] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &GridFunction {
        self.snapshots.last().expect("trajectory is nonempty")
    }

    /// Snapshot closest to time `t`.
    pub fn at(&self, t: f64) -> &GridFunction {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .expect("trajectory is nonempty");
        &self.snapshots[i]
    }

    /// Every `stride`-th snapshot, always keeping the first.
    pub fn subsample(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::Precondition("stride must be positive".into()));
        }
        let keep: Vec<usize> = (0..self.len()).step_by(stride).collect();
        Trajectory::new(
            keep.iter().map(|&i| self.times[i]).collect(),
            keep.iter().map(|&i| self.snapshots[i].clone()).collect(),
        )
    }

    /// CSV `time,index,x,value` (2-D grids add a `y` column after `x`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let grid = self.snapshots[0].grid();
        if grid.dim() == 1 {
            writeln!(out, "time,index,x,value")?;
        } else {
            writeln!(out, "time,index,x,y,value")?;
        }
        for (t, s) in self.times.iter().zip(&self.snapshots) {
            for (idx, v) in s.values().iter().enumerate() {
                let p = grid.point(idx);
                if grid.dim() == 1 {
                    writeln!(
                        out,
                        "{},{idx},{},{}",
                        fmt_f64(*t),
                        fmt_f64(p[0]),
                        fmt_f64(*v)
                    )?;
                } else {
                    writeln!(
                        out,
                        "{},{idx},{},{},{}",
                        fmt_f64(*t),
                        fmt_f64(p[0]),
                        fmt_f64(p[1]),
                        fmt_f64(*v)
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// `ln P(N > n)` bound for `N ~ Poisson(lambda)`, valid for `n + 1 > lambda`.
fn log_poisson_tail(lambda: f64, n: usize) -> f64 {
    let m = (n + 1) as f64;
    if lambda == 0.0 {
        return f64::NEG_INFINITY;
    }
    -lambda + m * (1.0 + lambda.ln() - m.ln())
}

/// Number of series terms after which the neglected Poisson mass is below `tol`.
pub fn series_terms(lambda: f64, tol: f64) -> Result<usize> {
    let log_tol = tol.ln();
    let mut n = lambda.ceil() as usize;
    while log_poisson_tail(lambda, n) > log_tol {
        n += 1;
        if n > SERIES_BUDGET {
            return Err(Error::SeriesBudget {
                needed: n,
                budget: SERIES_BUDGET,
            });
        }
    }
    Ok(n)
}

/// `E f(x + J_t)` for a compound Poisson process with jump measure
/// `rate * sum_i w_i delta_{y_i}`, summed as
/// `e^{-L} sum_{n <= N} L^n / n! Q^n f` with `L = t * rate * sum_i w_i` and `Q`
/// the grid convolution with the normalised jump law. Atoms must sit on grid
/// displacements.
pub fn poisson_series_apply(
    rate: f64,
    atoms: &[JumpAtom],
    t: f64,
    f: &GridFunction,
    tail_tol: f64,
) -> Result<GridFunction> {
    if !(rate.is_finite() && rate >= 0.0 && t.is_finite() && t >= 0.0) {
        return Err(Error::Precondition(format!(
            "need rate >= 0 and t >= 0, got {rate}, {t}"
        )));
    }
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tail_tol must be positive, got {tail_tol}"
        )));
    }
    let grid = f.grid();
    let mut kernel: Vec<([i64; 2], f64)> = Vec::with_capacity(atoms.len());
    for a in atoms {
        if !(a.weight.is_finite() && a.weight >= 0.0) {
            return Err(Error::Precondition(format!(
                "atom weight must be >= 0, got {}",
                a.weight
            )));
        }
        let (off, dist) = grid.snap_displacement(a.position);
        if dist > ON_GRID_TOL {
            return Err(Error::Precondition(format!(
                "atom at {:?} is {dist:e} away from the grid",
                a.position
            )));
        }
        kernel.push((off, a.weight));
    }
    let total: f64 = kernel.iter().map(|k| k.1).sum();
    let lambda = rate * total * t;
    if lambda == 0.0 {
        return Ok(f.clone());
    }
    let scale = 1.0 + f.sup_norm();
    let terms = series_terms(lambda, tail_tol / scale)?;

    let convolve = |g: &GridFunction| -> Vec<f64> {
        let mut acc = vec![0.0; g.len()];
        for &(off, w) in &kernel {
            let p = w / total;
            for (a, v) in acc.iter_mut().zip(g.cyclic_shift(off).values()) {
                *a += p * v;
            }
        }
        acc
    };

    let mut log_weight = -lambda;
    let mut power = f.clone();
    let mut sum: Vec<f64> = f.values().iter().map(|v| log_weight.exp() * v).collect();
    for n in 1..=terms {
        power = GridFunction::from_parts_unchecked(grid.clone(), convolve(&power));
        log_weight += lambda.ln() - (n as f64).ln();
        let w = log_weight.exp();
        for (s, v) in sum.iter_mut().zip(power.values()) {
            *s += w * v;
        }
    }
    GridFunction::new(grid.clone(), sum)
}

/// `exp(-sigma^2 |k|^2 t / 2)`: the continuum heat factor of mode `k`.
pub fn heat_factor(sigma: f64, k: [i64; 2], t: f64) -> f64 {
    let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
    (-0.5 * sigma * sigma * k2 * t).exp()
}

/// Heat factor of the nearest-neighbour random walk with spacing `h`:
/// `exp(sigma^2 t sum_i (cos(k_i h) - 1) / h^2)`.
pub fn lattice_heat_factor(sigma: f64, k: [i64; 2], h: f64, t: f64) -> f64 {
    let rate: f64 = k
        .iter()
        .map(|&ki| ((ki as f64 * h).cos() - 1.0) / (h * h))
        .sum();
    (sigma * sigma * t * rate).exp()
}

fn rk4_amplification(z: Complex64) -> f64 {
    // 1 + z + z^2/2 + z^3/6 + z^4/24 in Horner form
    let one = Complex64::new(1.0, 0.0);
    (one + z * (one + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))).norm()
}

fn rk4_stable(table: &SymbolTable, dt: f64) -> bool {
    table
        .symbols()
        .iter()
        .flatten()
        .all(|&psi| rk4_amplification(psi * dt) <= 1.0 + AMPLIFICATION_TOL)
}

/// Largest step for which RK4 does not amplify any Fourier mode of any member
/// (found by bisection to relative precision `1e-6`).
pub fn rk4_stability_bound(table: &SymbolTable) -> f64 {
    let m = table.max_abs();
    if m == 0.0 {
        return f64::INFINITY;
    }
    // the real-axis stability interval of RK4 is about [-2.785, 0]
    let mut lo = 0.0;
    let mut hi = 4.0 / m;
    if rk4_stable(table, hi) {
        return hi;
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if rk4_stable(table, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Classical RK4 on `u' = sup_lambda A_lambda u`, `u(0) = f`, with
/// `ceil(t / dt)` equal steps (so the last snapshot sits exactly at `t`).
pub fn picard_solve(table: &SymbolTable, f: &GridFunction, t: f64, dt: f64) -> Result<Trajectory> {
    table.grid().check_same(f.grid())?;
    if !(t.is_finite() && t >= 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::Precondition(format!(
            "need t >= 0 and dt > 0, got {t}, {dt}"
        )));
    }
    if !rk4_stable(table, dt) {
        return Err(Error::Unstable {
            dt,
            bound: rk4_stability_bound(table),
        });
    }
    let steps = ((t / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut times = vec![0.0];
    let mut snapshots = vec![f.clone()];
    if steps == 0 {
        return Trajectory::new(times, snapshots);
    }
    let h = t / steps as f64;
    let grid = f.grid().clone();
    let axpy = |u: &GridFunction, a: f64, k: &GridFunction| -> GridFunction {
        let v = u
            .values()
            .iter()
            .zip(k.values())
            .map(|(x, y)| x + a * y)
            .collect();
        GridFunction::from_parts_unchecked(grid.clone(), v)
    };
    let mut u = f.clone();
    for step in 1..=steps {
        let k1 = generator_sup(table, &u)?;
        let k2 = generator_sup(table, &axpy(&u, 0.5 * h, &k1))?;
        let k3 = generator_sup(table, &axpy(&u, 0.5 * h, &k2))?;
        let k4 = generator_sup(table, &axpy(&u, h, &k3))?;
        let next: Vec<f64> = (0..u.len())
            .map(|i| {
                let incr =
                    k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i];
                u.values()[i] + h / 6.0 * incr
            })
            .collect();
        u = GridFunction::new(grid.clone(), next)?;
        times.push(if step == steps { t } else { step as f64 * h });
        snapshots.push(u.clone());
    }
    Trajectory::new(times, snapshots)
}

/// Central-difference residual of `u' = sup_lambda A_lambda u` at one interior time.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub time: f64,
    pub sup_residual: f64,
    /// Sup over points whose maximising member is the same at `t - delta`, `t`
    /// and `t + delta`.
    pub smooth_sup_residual: f64,
    /// Points excluded from the smooth residual (argmax switches nearby).
    pub kink_points: usize,
    pub pointwise: Vec<f64>,
}

fn argmax_members(table: &SymbolTable, u: &GridFunction) -> Result<Vec<usize>> {
    let mut best = vec![0usize; u.len()];
    let mut value = vec![f64::NEG_INFINITY; u.len()];
    for i in 0..table.len() {
        let out = crate::levy::generator_apply_single(table.symbol(i), u)?;
        for (j, &v) in out.values().iter().enumerate() {
            if v > value[j] {
                value[j] = v;
                best[j] = i;
            }
        }
    }
    Ok(best)
}

/// `r(t) = || (u(t + delta) - u(t - delta)) / (2 delta) - sup_lambda A_lambda u(t) ||_inf`
/// at every interior time of a uniformly spaced trajectory.
pub fn residual_check(traj: &Trajectory, table: &SymbolTable) -> Result<Vec<ResidualRow>> {
    if traj.len() < 3 {
        return Err(Error::Precondition(format!(
            "residual needs at least 3 snapshots, got {}",
            traj.len()
        )));
    }
    table.grid().check_same(traj.snapshots[0].grid())?;
    let times = traj.times();
    let delta = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - delta).abs() > 1e-9 * delta.max(times[times.len() - 1]))
    {
        return Err(Error::Precondition(
            "residual needs uniformly spaced times".into(),
        ));
    }
    let snaps = traj.snapshots();
    let members: Vec<Vec<usize>> = if table.len() > 1 {
        snaps
            .iter()
            .map(|u| argmax_members(table, u))
            .collect::<Result<_>>()?
    } else {
        vec![vec![0; snaps[0].len()]; snaps.len()]
    };
    (1..traj.len() - 1)
        .map(|i| {
            let a = generator_sup(table, &snaps[i])?;
            let pointwise: Vec<f64> = (0..a.len())
                .map(|j| {
                    let d = (snaps[i + 1].values()[j] - snaps[i - 1].values()[j]) / (2.0 * delta);
                    (d - a.values()[j]).abs()
                })
                .collect();
            let mut smooth: f64 = 0.0;
            let mut kinks = 0;
            for (j, r) in pointwise.iter().enumerate() {
                let m = members[i][j];
                if members[i - 1][j] == m && members[i + 1][j] == m {
                    smooth = smooth.max(*r);
                } else {
                    kinks += 1;
                }
            }
            Ok(ResidualRow {
                time: times[i],
                sup_residual: pointwise.iter().copied().fold(0.0, f64::max),
                smooth_sup_residual: smooth,
                kink_points: kinks,
                pointwise,
            })
        })
        .collect()
}

/// CSV `time,sup_residual`.
pub fn write_residual_csv<W: Write>(rows: &[ResidualRow], mut out: W) -> Result<()> {
    writeln!(out, "time,sup_residual")?;
    for r in rows {
        writeln!(out, "{},{}", fmt_f64(r.time), fmt_f64(r.sup_residual))?;
    }
    Ok(())
}

/// Indicator of the box `max_i |x_i| <= halfwidth`.
pub fn plateau(grid: &TorusGrid, halfwidth: f64) -> Result<GridFunction> {
    GridFunction::from_fn(grid, |p| {
        let inside = p[0].abs() <= halfwidth && (grid.dim() == 1 || p[1].abs() <= halfwidth);
        if inside {
            1.0
        } else {
            0.0
        }
    })
}

/// `max_lambda (1 - min_{|x| <= w/2} S_lambda(t) 1_{|x| <= w})`: how much of a
/// plateau of half-width `w` leaks out of its inner half within time `t`.
pub fn mass_diagnostic(table: &SymbolTable, t: f64, window_halfwidth: f64) -> Result<f64> {
    let grid = table.grid();
    let h = grid.spacing();
    if !(window_halfwidth.is_finite()
        && window_halfwidth >= 2.0 * h
        && window_halfwidth < std::f64::consts::PI)
    {
        return Err(Error::Precondition(format!(
            "window half-width {window_halfwidth} must lie in [2h, pi)"
        )));
    }
    let ind = plateau(grid, window_halfwidth)?;
    let inner: Vec<usize> = (0..grid.len())
        .filter(|&idx| {
            let p = grid.point(idx);
            p[0].abs() <= 0.5 * window_halfwidth
                && (grid.dim() == 1 || p[1].abs() <= 0.5 * window_halfwidth)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..table.len() {
        let out = apply_linear(table.symbol(i), t, &ind)?;
        let lo = inner
            .iter()
            .map(|&j| out.values()[j])
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(1.0 - lo);
    }
    Ok(worst.max(0.0))
}
