//! Acceptance criteria 1-10, one PASS/FAIL line each. Exits non-zero if any
//! criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nisio_core::grid::{sample, InitialFunction};
use nisio_core::levy::{
    apply_linear, generator_apply_single, levy_symbol, JumpAtom, LevyQuadruple,
};
use nisio_core::mc::{
    dual_bound_suite, estimate, extract_strategy, interpolation_tolerance, model_tolerance,
    SchemeTolerance, SimpleStrategy,
};
use nisio_core::nisio::{apply_j, dpp_check, generator_limit_table, lipschitz_bound, nisio_evolve};
use nisio_core::oracles::{mass_diagnostic, picard_solve, poisson_series_apply};
use nisio_core::shipped;
use nisio_core::{
    Execution, GridFunction, NisioOptions, Partition, SymbolScheme, SymbolTable, TorusGrid,
};

type Check = Result<String, String>;

fn bump(g: &TorusGrid) -> GridFunction {
    sample(
        g,
        &InitialFunction::Bump {
            center: vec![0.0],
            width: PI / 2.0,
        },
    )
    .expect("bump samples")
}

fn cos1(g: &TorusGrid) -> GridFunction {
    GridFunction::from_fn(g, |p| p[0].cos()).expect("cos samples")
}

fn two_sigma_table(n: usize) -> SymbolTable {
    let g = TorusGrid::new(1, n).expect("grid");
    SymbolTable::new(&shipped::two_sigma(), &g, SymbolScheme::Lattice).expect("two-sigma table")
}

fn deep(level: usize) -> NisioOptions {
    NisioOptions {
        max_level: level,
        tol: 0.0,
        ..Default::default()
    }
}

fn ok_if(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    format!("error: {err}")
}

fn linear_consistency() -> Check {
    let g = TorusGrid::new(1, 256).map_err(e)?;
    let f = bump(&g);
    let mut worst_level0: f64 = 0.0;
    let mut singles = 0;
    for (name, fam) in shipped::catalogue_1d(&g).map_err(e)? {
        if fam.len() != 1 {
            continue;
        }
        for scheme in [SymbolScheme::Lattice, SymbolScheme::Continuum] {
            let table = SymbolTable::new(&fam, &g, scheme).map_err(|x| format!("{name}: {x}"))?;
            let r = nisio_evolve(&table, 0.2, &f, &NisioOptions::default()).map_err(e)?;
            if r.levels_used != 0 {
                return Err(format!("{name} used {} levels", r.levels_used));
            }
            let lin = apply_linear(table.symbol(0), 0.2, &f).map_err(e)?;
            worst_level0 = worst_level0.max(r.value.sup_distance(&lin).map_err(e)?);
        }
        singles += 1;
    }
    let mut worst_series: f64 = 0.0;
    let mut mu_only: Vec<LevyQuadruple> = shipped::cp_pair().members().to_vec();
    mu_only.extend(
        shipped::cauchy(&g, &shipped::CAUCHY_GAMMAS)
            .map_err(e)?
            .members()
            .iter()
            .cloned(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = g.spacing();
    for _ in 0..8 {
        let atoms = (0..rng.random_range(1..6))
            .map(|_| {
                JumpAtom::new_1d(
                    rng.random_range(-127i64..=128) as f64 * h,
                    rng.random_range(0.1..3.0),
                )
            })
            .collect();
        mu_only.push(LevyQuadruple::compound_poisson(1, atoms).map_err(e)?);
    }
    for q in &mu_only {
        let psi = levy_symbol(q, &g).map_err(e)?;
        let lin = apply_linear(&psi, 0.2, &f).map_err(e)?;
        let series = poisson_series_apply(1.0, q.mu(), 0.2, &f, 1e-10).map_err(e)?;
        worst_series = worst_series.max(lin.sup_distance(&series).map_err(e)?);
    }
    ok_if(
        worst_level0 <= 1e-10 && worst_series <= 1e-9 && singles > 0,
        format!(
            "level-0 vs linear {worst_level0:.2e} over {singles} singleton families (<= 1e-10); series vs linear {worst_series:.2e} over {} mu-only quadruples (<= 1e-9)",
            mu_only.len()
        ),
    )
}

fn monotone_convergence() -> Check {
    let table = two_sigma_table(128);
    let f = bump(table.grid());
    let r = nisio_evolve(&table, 0.2, &f, &deep(8)).map_err(e)?;
    let min_inc = r
        .levels
        .iter()
        .skip(1)
        .map(|s| s.min_increment)
        .fold(f64::INFINITY, f64::min);
    let inc8 = r.levels[8].sup_increment;
    ok_if(
        min_inc >= -1e-10 && inc8 <= 1e-4,
        format!("min pointwise increment {min_inc:.2e} (>= -1e-10); level-8 increment {inc8:.3e} (<= 1e-4)"),
    )
}

/// Gap between level 12 and RK4 at dt = 1e-3; measured 3.19e-6 when the
/// tolerance was frozen.
const PICARD_BASELINE: f64 = 3.19e-6;

fn picard_agreement() -> Check {
    let table = two_sigma_table(128);
    let f = bump(table.grid());
    let r = nisio_evolve(&table, 0.2, &f, &deep(12)).map_err(e)?;
    let u = picard_solve(&table, &f, 0.2, 1e-3).map_err(e)?;
    let gap = r.value.sup_distance(u.last()).map_err(e)?;
    ok_if(
        gap <= (2.0 * PICARD_BASELINE).min(5e-4),
        format!(
            "sup gap {gap:.3e} (<= 5e-4; baseline {PICARD_BASELINE:.2e}, regression beyond 2x)"
        ),
    )
}

fn lipschitz_bounds() -> Check {
    let table = two_sigma_table(128);
    let f = cos1(table.grid());
    let l = lipschitz_bound(&table, &f).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_j = f64::NEG_INFINITY;
    for _ in 0..20 {
        let (t1, t2): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let a = apply_j(&table, t1, &f, false).map_err(e)?.0;
        let b = apply_j(&table, t2, &f, false).map_err(e)?.0;
        worst_j = worst_j.max(a.sup_distance(&b).map_err(e)? - l * (t1 - t2).abs());
    }
    let mut worst_s = f64::NEG_INFINITY;
    for t in [0.05, 0.2, 0.5, 1.0] {
        let s = nisio_evolve(&table, t, &f, &deep(10)).map_err(e)?.value;
        worst_s = worst_s.max(s.sup_distance(&f).map_err(e)? - l * t);
    }
    ok_if(
        worst_j <= 1e-9 && worst_s <= 1e-8,
        format!("L_f = {l:.6}; max ||J_t1 f - J_t2 f|| - L_f|t1-t2| = {worst_j:.2e} (<= 1e-9); max ||S(t)f - f|| - L_f t = {worst_s:.2e} (<= 1e-8)"),
    )
}

fn kernel_suite() -> Check {
    let g = TorusGrid::new(1, 32).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 7];
    for _ in 0..100 {
        let fam = common::random_family(&mut rng, &g);
        let table = SymbolTable::new(&fam, &g, SymbolScheme::Lattice).map_err(e)?;
        let t = rng.random_range(0.01..1.0);
        for (w, d) in worst
            .iter_mut()
            .zip(common::kernel_defects(&mut rng, &table, t))
        {
            *w = w.max(d);
        }
    }
    let detail = common::PROPERTY_NAMES
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    ok_if(
        worst.iter().all(|&w| w <= 1e-9),
        format!("100 draws, worst defects: {detail} (<= 1e-9)"),
    )
}

fn generator_limit() -> Check {
    let table = two_sigma_table(128);
    let f = cos1(table.grid());
    let rows = generator_limit_table(&table, &f, &[0.1, 0.05, 0.025, 0.0125]).map_err(e)?;
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    ok_if(
        decreasing && errs[3] <= 0.5 * errs[0],
        format!(
            "errors {}: strictly decreasing {decreasing}, last/first {:.3} (<= 0.5)",
            errs.iter()
                .map(|x| format!("{x:.4e}"))
                .collect::<Vec<_>>()
                .join(", "),
            errs[3] / errs[0]
        ),
    )
}

fn dynamic_programming() -> Check {
    let table = two_sigma_table(128);
    let f = bump(table.grid());
    let d4 = dpp_check(&table, 0.1, 0.1, &f, 4).map_err(e)?;
    let d8 = dpp_check(&table, 0.1, 0.1, &f, 8).map_err(e)?;
    ok_if(
        d4 >= 2.0 * d8,
        format!(
            "defect level 4 {d4:.3e}, level 8 {d8:.3e}, factor {:.1} (>= 2)",
            d4 / d8
        ),
    )
}

fn small_jump_limit() -> Check {
    let g = TorusGrid::new(1, 64).map_err(e)?;
    let f = cos1(&g);
    let half = f.map(|v| -0.5 * v).map_err(e)?;
    let mut parts = Vec::new();
    let mut pass = true;
    for h in [0.1, 0.05, 0.01] {
        let fam = shipped::small_jumps(h).map_err(e)?;
        let psi = levy_symbol(&fam.members()[0], &g).map_err(e)?;
        let d = generator_apply_single(&psi, &f)
            .map_err(e)?
            .sup_distance(&half)
            .map_err(e)?;
        pass &= d <= 0.6 * h;
        parts.push(format!("h={h}: {d:.3e} (<= {:.3e})", 0.6 * h));
    }
    ok_if(pass, parts.join(", "))
}

fn dual_bounds() -> Check {
    let table = two_sigma_table(128);
    let g = table.grid().clone();
    let f = bump(&g);
    let fam = shipped::two_sigma();
    let t = 0.2;
    let level = 10;
    let r = nisio_evolve(&table, t, &f, &deep(level)).map_err(e)?;
    let picard = picard_solve(&table, &f, t, 1e-3).map_err(e)?;
    let continuum = SymbolTable::new(&fam, &g, SymbolScheme::Continuum).map_err(e)?;
    let tol = SchemeTolerance {
        picard_gap: r.value.sup_distance(picard.last()).map_err(e)?,
        level_gap: r.levels[level].sup_increment,
        interpolation: interpolation_tolerance(&f),
        model: model_tolerance(&table, &continuum, &f, t).map_err(e)?,
    };
    let scheme_tol = tol.total();
    let x0 = [0.0, 0.0];
    let value = r.value.interpolate(x0);
    let extracted = extract_strategy(&r, level).map_err(e)?;
    let mut strategies = vec![("extracted".to_string(), extracted.clone())];
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for i in 0..16 {
        let pi = Partition::dyadic(t, rng.random_range(0..=5)).map_err(e)?;
        strategies.push((
            format!("random{i:02}"),
            SimpleStrategy::random(pi, &g, 2, &mut rng),
        ));
    }
    let n_paths = 10_000;
    let seed = 2024;
    let report = dual_bound_suite(
        &fam,
        &f,
        x0,
        &strategies,
        value,
        scheme_tol,
        n_paths,
        seed,
        Execution::default(),
    )
    .map_err(e)?;
    let ext = &report.rows[0].estimate;
    let attained = (ext.mean - value).abs() <= scheme_tol + 3.0 * ext.stderr;
    let again = estimate(
        &fam,
        &extracted,
        &f,
        x0,
        n_paths,
        seed,
        Execution::Sequential,
    )
    .map_err(e)?;
    let reproducible = again.mean.to_bits() == ext.mean.to_bits()
        && again.stderr.to_bits() == ext.stderr.to_bits();
    let best_random = report.rows[1..]
        .iter()
        .map(|r| r.estimate.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    ok_if(
        report.all_ok() && attained && reproducible && scheme_tol <= 1e-2,
        format!(
            "nisio {value:.6}; extracted {:.6} +- {:.1e}; best random {best_random:.6}; scheme_tol {scheme_tol:.2e} (picard {:.1e}, level {:.1e}, interp {:.1e}, model {:.1e}; <= 1e-2); bounds ok {}/{}; bitwise reproducible {reproducible}",
            ext.mean,
            ext.stderr,
            tol.picard_gap,
            tol.level_gap,
            tol.interpolation,
            tol.model,
            report.rows.iter().filter(|r| r.bound_ok).count(),
            report.rows.len(),
        ),
    )
}

fn symbol_and_mass() -> Check {
    let g = TorusGrid::new(1, 256).map_err(e)?;
    let g2 = TorusGrid::new(2, 64).map_err(e)?;
    let mut families: Vec<(String, nisio_core::GeneratorFamily, TorusGrid)> =
        shipped::catalogue_1d(&g)
            .map_err(e)?
            .into_iter()
            .map(|(n, f)| (n, f, g.clone()))
            .collect();
    families.push(("anisotropic_2d".into(), shipped::anisotropic_2d(), g2));
    let mut max_re = f64::NEG_INFINITY;
    let mut max_zero: f64 = 0.0;
    for (name, fam, grid) in &families {
        for scheme in [SymbolScheme::Lattice, SymbolScheme::Continuum] {
            let table = SymbolTable::new(fam, grid, scheme).map_err(|x| format!("{name}: {x}"))?;
            for psi in table.symbols() {
                max_re = psi.iter().map(|p| p.re).fold(max_re, f64::max);
                max_zero = max_zero.max(psi[0].norm());
            }
        }
    }
    let mut masses = Vec::new();
    for gamma in shipped::CAUCHY_GAMMAS {
        let table = SymbolTable::new(
            &shipped::cauchy(&g, &[gamma]).map_err(e)?,
            &g,
            SymbolScheme::Lattice,
        )
        .map_err(e)?;
        masses.push((gamma, mass_diagnostic(&table, 0.2, PI / 2.0).map_err(e)?));
    }
    ok_if(
        max_re <= 1e-12 && max_zero == 0.0 && masses.iter().all(|m| m.1 <= 1e-3),
        format!(
            "{} families: max Re psi {max_re:.1e} (<= 1e-12), max |psi(0)| {max_zero:.1e}; Cauchy escaped mass {} (<= 1e-3)",
            families.len(),
            masses
                .iter()
                .map(|(g, m)| format!("gamma={g}: {m:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

/// Name, runner and optional runtime limit in seconds.
type Criterion = (&'static str, fn() -> Check, Option<u64>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("linear consistency", linear_consistency, Some(1)),
        (
            "monotone dyadic convergence",
            monotone_convergence,
            Some(10),
        ),
        ("Picard oracle agreement", picard_agreement, Some(60)),
        ("Lipschitz bounds", lipschitz_bounds, None),
        ("sublinear kernel suite", kernel_suite, None),
        ("generator limit", generator_limit, None),
        ("dynamic programming", dynamic_programming, None),
        ("small-jump limit", small_jump_limit, None),
        ("Monte Carlo dual bounds", dual_bounds, Some(120)),
        ("symbol and mass diagnostics", symbol_and_mass, None),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = run();
        let elapsed = clock.elapsed();
        let over = limit.is_some_and(|s| elapsed > Duration::from_secs(s));
        let pass = outcome.is_ok() && !over;
        let detail = match outcome {
            Ok(d) | Err(d) => d,
        };
        let budget = limit.map(|s| format!(", limit {s} s")).unwrap_or_default();
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
        if !pass {
            failures += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
