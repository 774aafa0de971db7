//! Monte Carlo evaluation of piecewise-constant feedback controls.
//!
//! A simple strategy fixes a time partition and, on each interval, a map from
//! grid points to family members. A controlled path starts at `x0`; at each
//! partition time it looks up the member assigned to its nearest grid point and
//! follows that member's Levy increments until the next partition time. Every
//! such strategy gives a lower bound for `S(t) f (x0)`, and the maximiser fields
//! recorded by the envelope iteration give a near-optimal one.
//!
//! Path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`,
//! so estimates do not depend on how paths are scheduled.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{wrap_point, GridFunction, TorusGrid, TorusPoint};
use crate::levy::{apply_linear, GeneratorFamily, IncrementSampler, SymbolTable};
use crate::nisio::{NisioResult, Partition};
use crate::table::fmt_f64;

pub const MIN_PATHS: usize = 100;

/// Partition plus one feedback map (grid point -> member index) per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleStrategy {
    partition: Partition,
    feedback: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyDoc {
    partition: Vec<f64>,
    feedback: Vec<Vec<u32>>,
}

impl SimpleStrategy {
    pub fn new(partition: Partition, feedback: Vec<Vec<u32>>) -> Result<Self> {
        if feedback.len() != partition.step_count() {
            return Err(Error::Config(format!(
                "{} feedback maps for {} intervals",
                feedback.len(),
                partition.step_count()
            )));
        }
        if let Some(first) = feedback.first() {
            if feedback.iter().any(|m| m.len() != first.len()) || first.is_empty() {
                return Err(Error::Config(
                    "feedback maps must cover the same nonempty grid".into(),
                ));
            }
        }
        Ok(SimpleStrategy {
            partition,
            feedback,
        })
    }

    /// Always use member `member`.
    pub fn constant(partition: Partition, grid: &TorusGrid, member: u32) -> Self {
        let feedback = vec![vec![member; grid.len()]; partition.step_count()];
        SimpleStrategy {
            partition,
            feedback,
        }
    }

    /// Independent uniform member choice at every grid point and interval.
    pub fn random<R: Rng + ?Sized>(
        partition: Partition,
        grid: &TorusGrid,
        members: usize,
        rng: &mut R,
    ) -> Self {
        let feedback = (0..partition.step_count())
            .map(|_| {
                (0..grid.len())
                    .map(|_| rng.random_range(0..members as u32))
                    .collect()
            })
            .collect();
        SimpleStrategy {
            partition,
            feedback,
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn feedback(&self) -> &[Vec<u32>] {
        &self.feedback
    }

    /// Check that the strategy fits a grid and a family of `members` members.
    pub fn check(&self, grid: &TorusGrid, members: usize) -> Result<()> {
        for map in &self.feedback {
            if map.len() != grid.len() {
                return Err(Error::Config(format!(
                    "feedback covers {} points, grid has {}",
                    map.len(),
                    grid.len()
                )));
            }
            if let Some(&bad) = map.iter().find(|&&m| m as usize >= members) {
                return Err(Error::Config(format!(
                    "feedback index {bad} with {members} members"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StrategyDoc = serde_json::from_str(text)?;
        SimpleStrategy::new(Partition::new(doc.partition)?, doc.feedback)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&StrategyDoc {
            partition: self.partition.times().to_vec(),
            feedback: self.feedback.clone(),
        })?)
    }
}

/// The maximiser fields recorded at `level`, read as a feedback strategy on the
/// dyadic partition of the horizon.
pub fn extract_strategy(result: &NisioResult, level: usize) -> Result<SimpleStrategy> {
    let field = result
        .argmax_at(level)
        .ok_or(Error::LevelNotRecorded(level))?;
    SimpleStrategy::new(
        Partition::dyadic(result.horizon, level)?,
        field.steps().to_vec(),
    )
}

/// Sampler state shared by all paths of one strategy.
pub struct PathSimulator<'a> {
    grid: &'a TorusGrid,
    samplers: Vec<IncrementSampler>,
    strategy: &'a SimpleStrategy,
    gaps: Vec<f64>,
}

impl<'a> PathSimulator<'a> {
    pub fn new(
        fam: &GeneratorFamily,
        grid: &'a TorusGrid,
        strategy: &'a SimpleStrategy,
    ) -> Result<Self> {
        if fam.dim() != grid.dim() {
            return Err(Error::Config(format!(
                "family of dimension {} on a {}-d grid",
                fam.dim(),
                grid.dim()
            )));
        }
        strategy.check(grid, fam.len())?;
        Ok(PathSimulator {
            grid,
            samplers: fam.members().iter().map(IncrementSampler::new).collect(),
            strategy,
            gaps: strategy.partition.gaps(),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.strategy.partition.end()
    }

    /// Terminal point of one controlled path.
    pub fn terminal<R: Rng + ?Sized>(&self, x0: TorusPoint, rng: &mut R) -> TorusPoint {
        let mut x = wrap_point(x0);
        for (dt, map) in self.gaps.iter().zip(&self.strategy.feedback) {
            let member = map[self.grid.nearest_index(x)] as usize;
            let dx = self.samplers[member].sample(*dt, rng);
            x = wrap_point([x[0] + dx[0], x[1] + dx[1]]);
        }
        x
    }
}

/// RNG of path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Terminal point of one path of `strat` started at `x0`. The strategy's
/// partition must end at `t`.
pub fn simulate_path<R: Rng + ?Sized>(
    fam: &GeneratorFamily,
    grid: &TorusGrid,
    strat: &SimpleStrategy,
    x0: TorusPoint,
    t: f64,
    rng: &mut R,
) -> Result<TorusPoint> {
    if (strat.partition.end() - t).abs() > 1e-12 * t.max(1.0) {
        return Err(Error::Precondition(format!(
            "strategy ends at {}, horizon is {t}",
            strat.partition.end()
        )));
    }
    Ok(PathSimulator::new(fam, grid, strat)?.terminal(x0, rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Mean and standard error of `values`, accumulated in index order around the
/// first value (so constant samples give their value and zero error exactly).
pub fn summarize(values: &[f64], seed: u64) -> McEstimate {
    let n = values.len();
    let shift = values[0];
    let (s1, s2) = values.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = v - shift;
        (a + d, b + d * d)
    });
    let nf = n as f64;
    let mean_shift = s1 / nf;
    let var = if n > 1 {
        ((s2 - nf * mean_shift * mean_shift) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate {
        mean: shift + mean_shift,
        stderr: (var / nf).sqrt(),
        n_paths: n,
        seed,
    }
}

/// Estimate `E f(X_t)` for the controlled process of `strat`; `f` is read off
/// the grid by periodic linear interpolation.
pub fn estimate(
    fam: &GeneratorFamily,
    strat: &SimpleStrategy,
    f: &GridFunction,
    x0: TorusPoint,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if n_paths < MIN_PATHS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_PATHS} paths, got {n_paths}"
        )));
    }
    let sim = PathSimulator::new(fam, f.grid(), strat)?;
    let values = exec.map_range(n_paths, |i| {
        let mut rng = path_rng(seed, i as u64);
        f.interpolate(sim.terminal(x0, &mut rng))
    });
    Ok(summarize(&values, seed))
}

/// `max |f(x_{j+1}) - 2 f(x_j) + f(x_{j-1})| / 8`, summed over axes: a bound on
/// the error of reading a smooth `f` by linear interpolation between grid points.
pub fn interpolation_tolerance(f: &GridFunction) -> f64 {
    let grid = f.grid();
    (0..grid.dim())
        .map(|axis| {
            let mut off = [0i64; 2];
            off[axis] = 1;
            let fwd = f.cyclic_shift(off);
            off[axis] = -1;
            let back = f.cyclic_shift(off);
            fwd.values()
                .iter()
                .zip(back.values())
                .zip(f.values())
                .map(|((a, b), c)| (a - 2.0 * c + b).abs())
                .fold(0.0, f64::max)
                / 8.0
        })
        .sum()
}

/// `max_lambda || S_lambda(t) f - S'_lambda(t) f ||_inf` between the semigroups of
/// two symbol tables of the same family (for instance lattice and continuum):
/// how far the scheme's member evolutions are from the simulated processes.
pub fn model_tolerance(
    scheme: &SymbolTable,
    simulated: &SymbolTable,
    f: &GridFunction,
    t: f64,
) -> Result<f64> {
    if scheme.len() != simulated.len() {
        return Err(Error::Config("symbol tables of different families".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 0..scheme.len() {
        let a = apply_linear(scheme.symbol(i), t, f)?;
        let b = apply_linear(simulated.symbol(i), t, f)?;
        worst = worst.max(a.sup_distance(&b)?);
    }
    Ok(worst)
}

/// Slack allowed between Monte Carlo means and the envelope value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemeTolerance {
    /// `|| nisio - picard ||_inf` at the horizon.
    pub picard_gap: f64,
    /// Sup increment of the last dyadic level.
    pub level_gap: f64,
    pub interpolation: f64,
    pub model: f64,
}

impl SchemeTolerance {
    pub fn total(&self) -> f64 {
        self.picard_gap + self.level_gap + self.interpolation + self.model
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyRow {
    pub name: String,
    pub estimate: McEstimate,
    /// `mean - 3 stderr <= nisio value + scheme_tol`.
    pub bound_ok: bool,
    /// `nisio value - mean`.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualBoundReport {
    pub nisio_value: f64,
    pub scheme_tol: f64,
    pub rows: Vec<StrategyRow>,
    /// Index of the strategy with the largest mean.
    pub best: usize,
    /// Running maximum of the means in strategy order.
    pub running_max: Vec<f64>,
}

impl DualBoundReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.bound_ok)
    }

    pub fn violations(&self) -> Vec<&StrategyRow> {
        self.rows.iter().filter(|r| !r.bound_ok).collect()
    }

    /// CSV `strategy,mean,stderr,n_paths,seed,bound_ok`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "strategy,mean,stderr,n_paths,seed,bound_ok")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.name,
                fmt_f64(r.estimate.mean),
                fmt_f64(r.estimate.stderr),
                r.estimate.n_paths,
                r.estimate.seed,
                r.bound_ok
            )?;
        }
        Ok(())
    }
}

/// Every strategy's estimate must stay below the envelope value at `x0`:
/// `mean - 3 stderr <= nisio_value + scheme_tol`.
#[allow(clippy::too_many_arguments)]
pub fn dual_bound_suite(
    fam: &GeneratorFamily,
    f: &GridFunction,
    x0: TorusPoint,
    strategies: &[(String, SimpleStrategy)],
    nisio_value: f64,
    scheme_tol: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<DualBoundReport> {
    if strategies.is_empty() {
        return Err(Error::Precondition("no strategies to test".into()));
    }
    let mut rows = Vec::with_capacity(strategies.len());
    let mut running_max = Vec::with_capacity(strategies.len());
    let mut best = 0;
    for (i, (name, strat)) in strategies.iter().enumerate() {
        let est = estimate(fam, strat, f, x0, n_paths, seed, exec)?;
        if est.mean
            > rows
                .get(best)
                .map_or(f64::NEG_INFINITY, |r: &StrategyRow| r.estimate.mean)
        {
            best = i;
        }
        running_max.push(
            running_max
                .last()
                .map_or(est.mean, |&m: &f64| m.max(est.mean)),
        );
        rows.push(StrategyRow {
            name: name.clone(),
            bound_ok: est.mean - 3.0 * est.stderr <= nisio_value + scheme_tol,
            gap: nisio_value - est.mean,
            estimate: est,
        });
    }
    Ok(DualBoundReport {
        nisio_value,
        scheme_tol,
        rows,
        best,
        running_max,
    })
}
