use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nisio_core::grid::{sample, InitialFunction};
use nisio_core::levy::LevyQuadruple;
use nisio_core::mc::{estimate, extract_strategy};
use nisio_core::nisio::{apply_j, generator_sup, nisio_evolve};
use nisio_core::shipped;
use nisio_core::{Execution, GeneratorFamily, NisioOptions, SymbolScheme, SymbolTable, TorusGrid};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bump(g: &TorusGrid) -> nisio_core::GridFunction {
    sample(
        g,
        &InitialFunction::Bump {
            center: vec![0.0; g.dim()],
            width: PI / 2.0,
        },
    )
    .unwrap()
}

fn mc_paths(c: &mut Criterion) {
    let g = TorusGrid::new(1, 128).unwrap();
    let f = bump(&g);
    let fam = shipped::two_sigma();
    let table = SymbolTable::new(&fam, &g, SymbolScheme::Lattice).unwrap();
    let opts = NisioOptions {
        max_level: 6,
        tol: 0.0,
        ..Default::default()
    };
    let strat = extract_strategy(&nisio_evolve(&table, 0.2, &f, &opts).unwrap(), 6).unwrap();
    let mut group = c.benchmark_group("mc_estimate_10k_paths");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate(&fam, &strat, &f, [0.0; 2], 10_000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn planar_envelope(c: &mut Criterion) {
    let g = TorusGrid::new(2, 256).unwrap();
    let f = bump(&g);
    let mut members = shipped::anisotropic_2d().members().to_vec();
    for s in [0.3, 0.6] {
        members.push(
            LevyQuadruple::new(2, [0.0; 2], [[s, 0.0], [0.0, s]], Vec::new(), Vec::new()).unwrap(),
        );
    }
    let fam = GeneratorFamily::unlabelled(members).unwrap();
    let mut group = c.benchmark_group("apply_j_256x256_4_members");
    group.sample_size(10);
    for (name, exec) in MODES {
        let table = SymbolTable::new(&fam, &g, SymbolScheme::Lattice)
            .unwrap()
            .with_execution(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| apply_j(&table, 0.05, black_box(&f), false).unwrap())
        });
    }
    group.finish();
}

fn many_members(c: &mut Criterion) {
    let g = TorusGrid::new(1, 4096).unwrap();
    let f = bump(&g);
    let fam = GeneratorFamily::unlabelled(
        (1..=16)
            .map(|i| LevyQuadruple::diffusion(0.1 * i as f64))
            .collect(),
    )
    .unwrap();
    let mut group = c.benchmark_group("generator_sup_4096_16_members");
    for (name, exec) in MODES {
        let table = SymbolTable::new(&fam, &g, SymbolScheme::Lattice)
            .unwrap()
            .with_execution(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generator_sup(&table, black_box(&f)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mc_paths, planar_envelope, many_members);
criterion_main!(benches);
