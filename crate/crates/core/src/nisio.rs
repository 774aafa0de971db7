//! Partition envelopes `J_pi` and the nonlinear semigroup obtained as their
//! monotone limit under dyadic refinement.
//!
//! For a partition `0 = t_0 < ... < t_m` the envelope is
//! `J_pi f = J_{t_1 - t_0} ... J_{t_m - t_{m-1}} f` with
//! `J_h f = sup_lambda S_lambda(h) f` pointwise. Refining a partition can only
//! increase `J_pi f`, so the dyadic iterates `(J_{t/2^n})^{2^n} f` increase
//! with `n`; their limit is `S(t) f`.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::levy::{apply_raw_multiplier, Propagator, SymbolTable};
use crate::table::fmt_f64;

/// Pointwise decrease between dyadic levels treated as a semigroup bug.
pub const MONOTONICITY_HARD_TOL: f64 = 1e-8;
pub const MAX_LEVEL: usize = 20;

/// Time grid `0 = t_0 < t_1 < ... < t_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
    /// Set for equidistant partitions so every step uses the identical `dt`.
    uniform_step: Option<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Precondition("partition must start at 0".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Precondition("partition times must be finite".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "partition times must be strictly increasing".into(),
            ));
        }
        // recognise a reloaded equidistant partition so it steps identically
        let steps = times.len() - 1;
        let end = times[steps];
        let dt = end / steps as f64;
        let uniform = steps > 0
            && times[..steps]
                .iter()
                .enumerate()
                .all(|(j, &s)| s == j as f64 * dt);
        Ok(Partition {
            times,
            uniform_step: uniform.then_some(dt),
        })
    }

    /// `{0, t/n, 2t/n, ..., t}`.
    pub fn equidistant(t: f64, steps: usize) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Precondition(format!("horizon must be > 0, got {t}")));
        }
        if steps == 0 {
            return Err(Error::Precondition(
                "an equidistant partition needs n >= 1".into(),
            ));
        }
        let dt = t / steps as f64;
        let mut times: Vec<f64> = (0..steps).map(|j| j as f64 * dt).collect();
        times.push(t);
        Ok(Partition {
            times,
            uniform_step: Some(dt),
        })
    }

    /// `2^level` equal steps.
    pub fn dyadic(t: f64, level: usize) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Precondition(format!(
                "level {level} exceeds {MAX_LEVEL}"
            )));
        }
        Partition::equidistant(t, 1 << level)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("partition is nonempty")
    }

    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    /// Step lengths in time order.
    pub fn gaps(&self) -> Vec<f64> {
        match self.uniform_step {
            Some(dt) => vec![dt; self.step_count()],
            None => self.times.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }

    /// `max_j (t_j - t_{j-1})`, zero for the trivial partition `{0}`.
    pub fn mesh(&self) -> f64 {
        self.gaps().into_iter().fold(0.0, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Whether every time of `coarser` is also a time of `self` (same end point).
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.end() == coarser.end() && coarser.times.iter().all(|t| self.times.contains(t))
    }

    pub fn union(&self, other: &Partition) -> Result<Partition> {
        let mut times: Vec<f64> = self.times.iter().chain(&other.times).copied().collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        Partition::new(times)
    }
}

/// Index of a maximising family member for every partition step (time order)
/// and grid point. Ties go to the lowest index.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgmaxField {
    steps: Vec<Vec<u32>>,
}

impl ArgmaxField {
    pub fn new(steps: Vec<Vec<u32>>) -> Self {
        ArgmaxField { steps }
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, j: usize) -> &[u32] {
        &self.steps[j]
    }

    pub fn steps(&self) -> &[Vec<u32>] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<Vec<u32>> {
        self.steps
    }

    /// CSV `step,index,x,lambda_index` (`x` is the first coordinate of the point).
    pub fn write_csv<W: Write>(&self, grid: &TorusGrid, mut out: W) -> Result<()> {
        writeln!(out, "step,index,x,lambda_index")?;
        for (j, row) in self.steps.iter().enumerate() {
            for (idx, lam) in row.iter().enumerate() {
                writeln!(out, "{j},{idx},{},{lam}", fmt_f64(grid.point(idx)[0]))?;
            }
        }
        Ok(())
    }
}

/// One envelope step `J f` with precomputed multipliers.
fn envelope_step(
    table: &SymbolTable,
    prop: &Propagator,
    f: &GridFunction,
    argmax: Option<&mut Vec<u32>>,
) -> Result<GridFunction> {
    if f.is_constant() {
        if let Some(a) = argmax {
            *a = vec![0; f.len()];
        }
        return Ok(f.clone());
    }
    let spec = f.grid().raw_forward(f.values());
    let outs = table.member_execution().map_range(table.len(), |i| {
        apply_raw_multiplier(f, &spec, prop.multiplier(i))
    });
    max_with_argmax(f.grid(), outs, argmax)
}

fn max_with_argmax(
    grid: &TorusGrid,
    outs: Vec<Result<GridFunction>>,
    argmax: Option<&mut Vec<u32>>,
) -> Result<GridFunction> {
    let mut outs = outs.into_iter();
    let mut best = outs.next().expect("family is nonempty")?.into_values();
    let mut idx = vec![0u32; best.len()];
    for (i, out) in outs.enumerate() {
        let out = out?;
        for ((b, a), &v) in best.iter_mut().zip(idx.iter_mut()).zip(out.values()) {
            if v > *b {
                *b = v;
                *a = (i + 1) as u32;
            }
        }
    }
    if let Some(a) = argmax {
        *a = idx;
    }
    GridFunction::new(grid.clone(), best)
}

fn check_table(table: &SymbolTable, f: &GridFunction) -> Result<()> {
    table.grid().check_same(f.grid())
}

/// `J_t f = sup_lambda S_lambda(t) f`, optionally with the maximiser field.
pub fn apply_j(
    table: &SymbolTable,
    t: f64,
    f: &GridFunction,
    record_argmax: bool,
) -> Result<(GridFunction, Option<ArgmaxField>)> {
    check_table(table, f)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    let mut idx = Vec::new();
    let value = if t == 0.0 {
        idx = vec![0; f.len()];
        f.clone()
    } else {
        let prop = table.propagator(t)?;
        envelope_step(table, &prop, f, record_argmax.then_some(&mut idx))?
    };
    Ok((value, record_argmax.then(|| ArgmaxField::new(vec![idx]))))
}

fn compose(
    table: &SymbolTable,
    pi: &Partition,
    f: &GridFunction,
    record: bool,
) -> Result<(GridFunction, Option<ArgmaxField>)> {
    check_table(table, f)?;
    let gaps = pi.gaps();
    let mut steps: Vec<Vec<u32>> = if record {
        vec![Vec::new(); gaps.len()]
    } else {
        Vec::new()
    };
    let mut cache: HashMap<u64, Propagator> = HashMap::new();
    let mut v = f.clone();
    // rightmost factor J_{t_m - t_{m-1}} acts first
    for j in (0..gaps.len()).rev() {
        let dt = gaps[j];
        if !cache.contains_key(&dt.to_bits()) {
            if cache.len() > 8 {
                cache.clear();
            }
            cache.insert(dt.to_bits(), table.propagator(dt)?);
        }
        let prop = &cache[&dt.to_bits()];
        v = envelope_step(table, prop, &v, record.then(|| &mut steps[j]))?;
    }
    Ok((v, record.then(|| ArgmaxField::new(steps))))
}

/// `J_pi f`.
pub fn apply_partition(
    table: &SymbolTable,
    pi: &Partition,
    f: &GridFunction,
) -> Result<GridFunction> {
    Ok(compose(table, pi, f, false)?.0)
}

/// `J_pi f` together with the maximiser of every step.
pub fn apply_partition_recording(
    table: &SymbolTable,
    pi: &Partition,
    f: &GridFunction,
) -> Result<(GridFunction, ArgmaxField)> {
    let (v, a) = compose(table, pi, f, true)?;
    Ok((v, a.expect("recording requested")))
}

/// `(J_{t/2^level})^{2^level} f`.
pub fn dyadic_iterate(
    table: &SymbolTable,
    t: f64,
    f: &GridFunction,
    level: usize,
) -> Result<GridFunction> {
    apply_partition(table, &Partition::dyadic(t, level)?, f)
}

/// `(J_{t/n})^n f`; for `n = 2^m` this is bitwise the dyadic level-`m` iterate.
pub fn chernoff_equidistant(
    table: &SymbolTable,
    t: f64,
    f: &GridFunction,
    n: usize,
) -> Result<GridFunction> {
    apply_partition(table, &Partition::equidistant(t, n)?, f)
}

/// Stopping rule and recording choices for [`nisio_evolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NisioOptions {
    pub max_level: usize,
    /// Stop once the largest pointwise increase between levels drops below this.
    pub tol: f64,
    /// Keep the maximiser field of the final level.
    pub record_last: bool,
    /// Additional levels whose maximiser fields are kept.
    pub record_levels: Vec<usize>,
}

impl Default for NisioOptions {
    fn default() -> Self {
        NisioOptions {
            max_level: 12,
            tol: 1e-6,
            record_last: true,
            record_levels: Vec::new(),
        }
    }
}

/// Diagnostics of one dyadic level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub steps: usize,
    /// `max_x (v_level - v_{level-1})(x)`; NaN at level 0.
    pub sup_increment: f64,
    /// `min_x (v_level - v_{level-1})(x)`; NaN at level 0.
    pub min_increment: f64,
    pub sup_norm: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug)]
pub struct NisioResult {
    pub horizon: f64,
    pub value: GridFunction,
    pub levels_used: usize,
    pub converged: bool,
    pub levels: Vec<LevelStats>,
    pub lipschitz_bound: f64,
    pub family_constant: f64,
    /// Largest pointwise decrease seen between consecutive levels (0 when monotone).
    pub monotonicity_defect: f64,
    pub argmax: Vec<(usize, ArgmaxField)>,
}

impl NisioResult {
    /// Per-level sup-norm increments, levels `1..=levels_used`.
    pub fn increments(&self) -> Vec<f64> {
        self.levels
            .iter()
            .skip(1)
            .map(|s| s.sup_increment)
            .collect()
    }

    pub fn argmax_at(&self, level: usize) -> Option<&ArgmaxField> {
        self.argmax
            .iter()
            .find(|(l, _)| *l == level)
            .map(|(_, a)| a)
    }

    /// CSV `level,steps,sup_increment,min_increment,sup_norm`. Timings are left
    /// out so that the file is a deterministic function of the inputs.
    pub fn write_convergence_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "level,steps,sup_increment,min_increment,sup_norm")?;
        for s in &self.levels {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.level,
                s.steps,
                fmt_f64(s.sup_increment),
                fmt_f64(s.min_increment),
                fmt_f64(s.sup_norm)
            )?;
        }
        Ok(())
    }
}

/// Dyadic approximation of `S(t) f`: levels `0, 1, 2, ...` until the sup-norm
/// increment drops below `opts.tol` or `opts.max_level` is reached.
///
/// A single-member family or a constant datum is exact at level 0. Running out
/// of levels is reported through `converged = false`, not as an error; a
/// pointwise decrease beyond [`MONOTONICITY_HARD_TOL`] is an error.
pub fn nisio_evolve(
    table: &SymbolTable,
    t: f64,
    f: &GridFunction,
    opts: &NisioOptions,
) -> Result<NisioResult> {
    check_table(table, f)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Precondition(format!("horizon must be > 0, got {t}")));
    }
    if opts.max_level > MAX_LEVEL {
        return Err(Error::Precondition(format!(
            "max_level {} exceeds {MAX_LEVEL}",
            opts.max_level
        )));
    }
    if !(opts.tol.is_finite() && opts.tol >= 0.0) {
        return Err(Error::Precondition(format!(
            "tol must be >= 0, got {}",
            opts.tol
        )));
    }
    let lipschitz = lipschitz_bound(table, f)?;
    let exact_at_zero = table.len() == 1 || f.is_constant();
    let last_level = if exact_at_zero { 0 } else { opts.max_level };

    let mut levels = Vec::new();
    let mut argmax = Vec::new();
    let mut prev: Option<GridFunction> = None;
    let mut converged = exact_at_zero;
    let mut defect: f64 = 0.0;
    for level in 0..=last_level {
        let clock = Instant::now();
        let (v, field) = apply_partition_recording(table, &Partition::dyadic(t, level)?, f)?;
        let (sup_inc, min_inc) = match &prev {
            None => (f64::NAN, f64::NAN),
            Some(p) => v
                .values()
                .iter()
                .zip(p.values())
                .map(|(a, b)| a - b)
                .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), d| {
                    (hi.max(d), lo.min(d))
                }),
        };
        if prev.is_some() {
            defect = defect.max(-min_inc);
            if min_inc < -MONOTONICITY_HARD_TOL {
                return Err(Error::Monotonicity {
                    level,
                    decrease: -min_inc,
                });
            }
        }
        levels.push(LevelStats {
            level,
            steps: 1 << level,
            sup_increment: sup_inc,
            min_increment: min_inc,
            sup_norm: v.sup_norm(),
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        if opts.record_levels.contains(&level) {
            argmax.push((level, field.clone()));
        }
        if prev.is_some() && sup_inc < opts.tol {
            converged = true;
        }
        let done = converged || level == last_level;
        if done && opts.record_last && !opts.record_levels.contains(&level) {
            argmax.push((level, field));
        }
        prev = Some(v);
        if done {
            break;
        }
    }
    let levels_used = levels.len() - 1;
    Ok(NisioResult {
        horizon: t,
        value: prev.expect("at least level 0 is computed"),
        levels_used,
        converged,
        levels,
        lipschitz_bound: lipschitz,
        family_constant: table.family_constant(),
        monotonicity_defect: defect.max(0.0),
        argmax,
    })
}

fn generator_outputs(table: &SymbolTable, f: &GridFunction) -> Result<Vec<GridFunction>> {
    check_table(table, f)?;
    if f.is_constant() {
        let zero = GridFunction::constant(f.grid(), 0.0)?;
        return Ok(vec![zero; table.len()]);
    }
    let spec: Vec<Complex64> = f.grid().raw_forward(f.values());
    table
        .member_execution()
        .map_range(table.len(), |i| {
            apply_raw_multiplier(f, &spec, table.symbol(i))
        })
        .into_iter()
        .collect()
}

/// `sup_lambda A_lambda f` pointwise.
pub fn generator_sup(table: &SymbolTable, f: &GridFunction) -> Result<GridFunction> {
    let outs = generator_outputs(table, f)?;
    max_with_argmax(f.grid(), outs.into_iter().map(Ok).collect(), None)
}

/// `L_f = sup_lambda ||A_lambda f||_inf`.
pub fn lipschitz_bound(table: &SymbolTable, f: &GridFunction) -> Result<f64> {
    Ok(generator_outputs(table, f)?
        .iter()
        .map(GridFunction::sup_norm)
        .fold(0.0, f64::max))
}

/// `|| S(s+t) f - S(s) S(t) f ||_inf` with every semigroup evaluated at the same
/// dyadic level.
pub fn dpp_check(
    table: &SymbolTable,
    s: f64,
    t: f64,
    f: &GridFunction,
    level: usize,
) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::Precondition(format!(
            "dpp_check needs s, t > 0, got {s}, {t}"
        )));
    }
    let joint = dyadic_iterate(table, s + t, f, level)?;
    let inner = dyadic_iterate(table, t, f, level)?;
    let split = dyadic_iterate(table, s, &inner, level)?;
    joint.sup_distance(&split)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorLimitRow {
    pub h: f64,
    pub level: usize,
    pub error: f64,
}

/// Errors `|| (S(h) f - f) / h - sup_lambda A_lambda f ||_inf` along a
/// decreasing list of `h`. `S(h)` is the dyadic iterate at level
/// `max(8, ceil(log2(h_0 / h)) + 4)`.
pub fn generator_limit_table(
    table: &SymbolTable,
    f: &GridFunction,
    h_list: &[f64],
) -> Result<Vec<GeneratorLimitRow>> {
    let h0 = *h_list
        .first()
        .ok_or_else(|| Error::Precondition("empty h list".into()))?;
    if h_list.iter().any(|h| !(h.is_finite() && *h > 0.0))
        || h_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Precondition(
            "h list must be positive and strictly decreasing".into(),
        ));
    }
    let target = generator_sup(table, f)?;
    h_list
        .iter()
        .map(|&h| {
            let level = 8.max((h0 / h).log2().ceil() as usize + 4).min(MAX_LEVEL);
            let sh = dyadic_iterate(table, h, f, level)?;
            let error = sh
                .values()
                .iter()
                .zip(f.values())
                .zip(target.values())
                .map(|((s, f0), a)| ((s - f0) / h - a).abs())
                .fold(0.0, f64::max);
            Ok(GeneratorLimitRow { h, level, error })
        })
        .collect()
}

/// Largest `|| J_pi f - J_pi' f ||_inf` over partitions `pi'` obtained by moving a
/// single time `t_j`, `j >= 1`, by `+-eps`.
pub fn partition_continuity_probe(
    table: &SymbolTable,
    pi: &Partition,
    f: &GridFunction,
    eps: f64,
) -> Result<f64> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Precondition(format!("eps must be >= 0, got {eps}")));
    }
    if pi.step_count() == 0 || eps == 0.0 {
        return Ok(0.0);
    }
    if eps >= 0.5 * pi.min_gap() {
        return Err(Error::Precondition(format!(
            "eps {eps} must be below half the smallest gap {}",
            pi.min_gap()
        )));
    }
    let base = apply_partition(table, pi, f)?;
    let mut worst: f64 = 0.0;
    for j in 1..pi.times.len() {
        for sign in [-1.0, 1.0] {
            let mut times = pi.times.clone();
            times[j] += sign * eps;
            let moved = apply_partition(table, &Partition::new(times)?, f)?;
            worst = worst.max(base.sup_distance(&moved)?);
        }
    }
    Ok(worst)
}
