//! The four subcommands. Each writes its CSV files and a manifest into the
//! output directory and returns the exit code.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nisio_core::grid::{sample, GridFunction};
use nisio_core::mc::{
    dual_bound_suite, extract_strategy, interpolation_tolerance, model_tolerance, path_rng,
    SchemeTolerance, SimpleStrategy,
};
use nisio_core::nisio::{
    dpp_check, dyadic_iterate, generator_limit_table, nisio_evolve, NisioResult,
};
use nisio_core::oracles::{picard_solve, residual_check, rk4_stability_bound, write_residual_csv};
use nisio_core::table::fmt_f64;
use nisio_core::{Execution, GeneratorFamily, Partition, SymbolScheme, SymbolTable, TorusGrid};
use rand::Rng;

use crate::config::RunConfig;
use crate::manifest::{Check, RunManifest};
use crate::CliError;

pub const EXIT_TOLERANCE: i32 = 2;

/// Lowest increment accepted between consecutive dyadic levels.
const MONOTONE_TOL: f64 = 1e-10;

struct Setup {
    grid: TorusGrid,
    family: GeneratorFamily,
    table: SymbolTable,
    f: GridFunction,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let grid = cfg.grid()?;
    let family = cfg.family(&grid)?;
    let table = SymbolTable::new(&family, &grid, cfg.scheme)?;
    let f = sample(&grid, &cfg.initial)?;
    Ok(Setup {
        grid,
        family,
        table,
        f,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn ms(clock: Instant) -> f64 {
    clock.elapsed().as_secs_f64() * 1e3
}

fn point(v: &[f64]) -> [f64; 2] {
    [v[0], v.get(1).copied().unwrap_or(0.0)]
}

/// Run the envelope iteration and record its diagnostics.
fn evolve_into(
    cfg: &RunConfig,
    s: &Setup,
    m: &mut RunManifest,
    out: &Path,
) -> Result<NisioResult, CliError> {
    let clock = Instant::now();
    let r = nisio_evolve(&s.table, cfg.t, &s.f, &cfg.nisio)?;
    m.time("nisio", ms(clock));
    for lvl in &r.levels {
        m.time(&format!("nisio_level_{}", lvl.level), lvl.elapsed_ms);
    }
    m.diag("family_constant", r.family_constant);
    m.diag("lipschitz_bound", r.lipschitz_bound);
    m.diag("levels_used", r.levels_used);
    m.diag("converged", r.converged);
    m.diag("increments", r.increments());
    m.diag("monotonicity_defect", r.monotonicity_defect);
    m.diag("snap_distance", s.table.snap_distance());
    r.value.write_csv(create(out, "value.csv")?)?;
    r.write_convergence_csv(create(out, "convergence.csv")?)?;
    if let Some(a) = r.argmax_at(r.levels_used) {
        a.write_csv(&s.grid, create(out, "argmax.csv")?)?;
    }
    Ok(r)
}

fn convergence_check(cfg: &RunConfig, r: &NisioResult) -> Check {
    let last = r.levels.last().map_or(0.0, |l| l.sup_increment);
    let measured = if r.levels_used == 0 || last.is_nan() {
        if r.converged {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        last
    };
    Check {
        name: "nisio.final_increment".into(),
        measured,
        tolerance: cfg.nisio.tol,
        pass: r.converged,
    }
}

fn monotone_check(r: &NisioResult) -> Check {
    Check::at_most(
        "nisio.monotonicity_defect",
        r.monotonicity_defect,
        MONOTONE_TOL,
    )
}

pub fn evolve(cfg: &RunConfig, out: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let r = evolve_into(cfg, &s, m, out)?;
    m.check(convergence_check(cfg, &r));
    m.check(monotone_check(&r));
    Ok(())
}

pub fn oracle(cfg: &RunConfig, out: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let bound = rk4_stability_bound(&s.table);
    m.diag("rk4_stability_bound", bound);
    if cfg.oracle.dt > bound {
        return Err(CliError::Config(format!(
            "oracle.dt {:e} exceeds the RK4 stability bound {bound:e}",
            cfg.oracle.dt
        )));
    }
    let r = evolve_into(cfg, &s, m, out)?;
    let clock = Instant::now();
    let traj = picard_solve(&s.table, &s.f, cfg.t, cfg.oracle.dt)?;
    m.time("picard", ms(clock));
    traj.write_csv(create(out, "trajectory.csv")?)?;

    let mut gaps = create(out, "gaps.csv")?;
    writeln!(gaps, "level,gap")?;
    let mut gap_table = Vec::new();
    for level in 0..=r.levels_used {
        let v = if level == r.levels_used {
            r.value.clone()
        } else {
            dyadic_iterate(&s.table, cfg.t, &s.f, level)?
        };
        let gap = v.sup_distance(traj.last())?;
        writeln!(gaps, "{level},{}", fmt_f64(gap))?;
        gap_table.push(gap);
    }
    gaps.flush()?;
    let final_gap = *gap_table.last().expect("level 0 is always present");
    m.diag("picard_gaps", &gap_table);

    if traj.len() >= 3 {
        let rows = residual_check(&traj, &s.table)?;
        write_residual_csv(&rows, create(out, "residual.csv")?)?;
        let worst = rows.iter().map(|r| r.sup_residual).fold(0.0, f64::max);
        let smooth = rows
            .iter()
            .map(|r| r.smooth_sup_residual)
            .fold(0.0, f64::max);
        m.diag("max_residual", worst);
        m.diag("max_smooth_residual", smooth);
    }
    m.check(Check::at_most(
        "oracle.picard_gap",
        final_gap,
        cfg.oracle.gap_tol,
    ));
    m.check(monotone_check(&r));
    Ok(())
}

pub fn convergence(cfg: &RunConfig, out: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let r = evolve_into(cfg, &s, m, out)?;
    m.check(convergence_check(cfg, &r));
    m.check(monotone_check(&r));

    if !cfg.convergence.h_list.is_empty() {
        let clock = Instant::now();
        let rows = generator_limit_table(&s.table, &s.f, &cfg.convergence.h_list)?;
        m.time("generator_limit", ms(clock));
        let mut w = create(out, "generator_limit.csv")?;
        writeln!(w, "h,level,error")?;
        for row in &rows {
            writeln!(w, "{},{},{}", fmt_f64(row.h), row.level, fmt_f64(row.error))?;
        }
        w.flush()?;
        let worst_ratio = rows
            .windows(2)
            .map(|p| p[1].error / p[0].error)
            .fold(0.0, f64::max);
        m.diag(
            "generator_limit_errors",
            rows.iter().map(|r| r.error).collect::<Vec<_>>(),
        );
        m.check(Check {
            name: "convergence.generator_limit_max_ratio".into(),
            measured: worst_ratio,
            tolerance: 1.0,
            pass: worst_ratio < 1.0,
        });
    }

    if !cfg.convergence.dpp_levels.is_empty() {
        let half = 0.5 * cfg.t;
        let mut w = create(out, "dpp.csv")?;
        writeln!(w, "level,defect")?;
        let mut defects = Vec::new();
        for &level in &cfg.convergence.dpp_levels {
            let d = dpp_check(&s.table, half, half, &s.f, level)?;
            writeln!(w, "{level},{}", fmt_f64(d))?;
            defects.push(d);
        }
        w.flush()?;
        m.diag("dpp_defects", defects);
    }
    Ok(())
}

pub fn mc(cfg: &RunConfig, out: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let mut cfg_rec = cfg.clone();
    cfg_rec.nisio.record_last = true;
    let r = evolve_into(&cfg_rec, &s, m, out)?;
    m.check(monotone_check(&r));

    let clock = Instant::now();
    let picard = picard_solve(&s.table, &s.f, cfg.t, cfg.oracle.dt)?;
    m.time("picard", ms(clock));
    let simulated = SymbolTable::new(&s.family, &s.grid, SymbolScheme::Continuum)?;
    let tol = SchemeTolerance {
        picard_gap: r.value.sup_distance(picard.last())?,
        level_gap: if r.levels_used == 0 {
            0.0
        } else {
            r.levels[r.levels_used].sup_increment
        },
        interpolation: interpolation_tolerance(&s.f),
        model: model_tolerance(&s.table, &simulated, &s.f, cfg.t)?,
    };
    let scheme_tol = tol.total();
    m.diag("scheme_tolerance", tol);
    m.check(Check::at_most(
        "mc.scheme_tol",
        scheme_tol,
        cfg.mc.scheme_tol_budget,
    ));

    let x0 = point(&cfg.mc.x0);
    let value = r.value.interpolate(x0);
    m.diag("nisio_value_at_x0", value);

    let extracted = extract_strategy(&r, r.levels_used)?;
    fs::write(out.join("strategy_extracted.json"), extracted.to_json()?)?;
    let mut strategies = vec![("extracted".to_string(), extracted)];
    // strategy generation uses a stream no path ever draws from
    let mut rng = path_rng(cfg.mc.seed, u64::MAX);
    for i in 0..cfg.mc.random_strategies {
        let level = rng.random_range(0..=cfg.mc.random_max_level);
        let pi = Partition::dyadic(cfg.t, level)?;
        strategies.push((
            format!("random{i:02}"),
            SimpleStrategy::random(pi, &s.grid, s.family.len(), &mut rng),
        ));
    }
    for p in &cfg.mc.strategy_files {
        let strat = SimpleStrategy::from_json(&fs::read_to_string(p)?)?;
        if (strat.partition().end() - cfg.t).abs() > 1e-12 * cfg.t {
            return Err(CliError::Config(format!(
                "{} does not end at t = {}",
                p.display(),
                cfg.t
            )));
        }
        strat.check(&s.grid, s.family.len())?;
        let name = p
            .file_stem()
            .map_or("file".into(), |n| n.to_string_lossy().into_owned());
        strategies.push((name, strat));
    }

    let clock = Instant::now();
    let report = dual_bound_suite(
        &s.family,
        &s.f,
        x0,
        &strategies,
        value,
        scheme_tol,
        cfg.mc.n_paths,
        cfg.mc.seed,
        Execution::default(),
    )?;
    m.time("monte_carlo", ms(clock));
    report.write_csv(create(out, "estimates.csv")?)?;
    m.diag("best_strategy", &report.rows[report.best].name);
    m.diag("best_gap", report.rows[report.best].gap);
    m.diag("running_max", &report.running_max);
    for row in &report.rows {
        m.check(Check {
            name: format!("mc.bound.{}", row.name),
            measured: row.estimate.mean - 3.0 * row.estimate.stderr,
            tolerance: value + scheme_tol,
            pass: row.bound_ok,
        });
    }
    let ext = &report.rows[0].estimate;
    m.check(Check::at_most(
        "mc.extracted_attainment",
        (ext.mean - value).abs(),
        scheme_tol + 3.0 * ext.stderr,
    ));
    Ok(())
}
