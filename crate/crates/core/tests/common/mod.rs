#![allow(dead_code)]

use rand::Rng;

use nisio_core::levy::{JumpAtom, LevyQuadruple};
use nisio_core::nisio::apply_partition;
use nisio_core::{GeneratorFamily, GridFunction, Partition, SymbolTable, TorusGrid};

pub const PROPERTY_NAMES: [&str; 7] = [
    "monotonicity",
    "sublinearity",
    "positive homogeneity",
    "constant preservation",
    "1-Lipschitz",
    "partition monotonicity",
    "translation equivariance",
];

/// Two or three random one-dimensional quadruples with on-grid jumps.
pub fn random_family<R: Rng>(rng: &mut R, grid: &TorusGrid) -> GeneratorFamily {
    let h = grid.spacing();
    let half = (grid.n() / 2) as i64;
    let members = (0..rng.random_range(2..=3))
        .map(|_| {
            let sigma = if rng.random_bool(0.7) {
                rng.random_range(0.0..1.2)
            } else {
                0.0
            };
            let drift = if rng.random_bool(0.5) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            };
            let mu = (0..rng.random_range(0..3))
                .map(|_| {
                    JumpAtom::new_1d(
                        rng.random_range(-half + 1..=half) as f64 * h,
                        rng.random_range(0.1..2.0),
                    )
                })
                .collect();
            let nu = (0..rng.random_range(0..2))
                .map(|_| {
                    let k = rng.random_range(1..4) as f64
                        * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    JumpAtom::new_1d(k * h, rng.random_range(0.1..5.0))
                })
                .collect();
            LevyQuadruple::new(1, [drift, 0.0], [[sigma * sigma, 0.0], [0.0, 0.0]], mu, nu).unwrap()
        })
        .collect();
    GeneratorFamily::unlabelled(members).unwrap()
}

pub fn random_function<R: Rng>(rng: &mut R, grid: &TorusGrid) -> GridFunction {
    GridFunction::new(
        grid.clone(),
        (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// Random partition of `[0, t]` with 1 to 4 steps.
pub fn random_partition<R: Rng>(rng: &mut R, t: f64) -> Partition {
    let mut inner: Vec<f64> = (0..rng.random_range(0..4))
        .map(|_| rng.random_range(0.05..0.95) * t)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * t);
    let mut times = vec![0.0];
    times.extend(inner);
    times.push(t);
    Partition::new(times).unwrap()
}

/// `pi` with up to three extra random points.
pub fn random_refinement<R: Rng>(rng: &mut R, pi: &Partition) -> Partition {
    let t = pi.end();
    let extra = random_partition(rng, t);
    pi.union(&extra).unwrap()
}

fn excess(a: &GridFunction, b: &GridFunction) -> f64 {
    // max (a - b)
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

/// Largest violation of each of the seven kernel properties of `J_pi`.
pub fn kernel_defects<R: Rng>(rng: &mut R, table: &SymbolTable, t: f64) -> [f64; 7] {
    let grid = table.grid().clone();
    let pi = random_partition(rng, t);
    let fine = random_refinement(rng, &pi);
    let f = random_function(rng, &grid);
    let g = random_function(rng, &grid);
    let c: f64 = rng.random_range(0.1..3.0);
    let shift = [rng.random_range(-(grid.n() as i64)..grid.n() as i64), 0];
    let j = |u: &GridFunction| apply_partition(table, &pi, u).unwrap();

    let jf = j(&f);
    let jg = j(&g);
    let upper = f.zip_map(&g, f64::max).unwrap();
    let monotone = excess(&jf, &j(&upper)).max(excess(&jg, &j(&upper)));
    let sum = f.zip_map(&g, |a, b| a + b).unwrap();
    let sublinear = excess(&j(&sum), &jf.zip_map(&jg, |a, b| a + b).unwrap());
    let homogeneous = j(&f.map(|v| c * v).unwrap())
        .sup_distance(&jf.map(|v| c * v).unwrap())
        .unwrap();
    let constant = GridFunction::constant(&grid, c).unwrap();
    let shifted_const = j(&f.map(|v| v + c).unwrap())
        .sup_distance(&jf.map(|v| v + c).unwrap())
        .unwrap();
    let constants = j(&constant)
        .sup_distance(&constant)
        .unwrap()
        .max(shifted_const);
    let lipschitz = (jf.sup_distance(&jg).unwrap() - f.sup_distance(&g).unwrap()).max(0.0);
    let refined = excess(&jf, &apply_partition(table, &fine, &f).unwrap());
    let translation = j(&f.cyclic_shift(shift))
        .sup_distance(&jf.cyclic_shift(shift))
        .unwrap();
    [
        monotone,
        sublinear,
        homogeneous,
        constants,
        lipschitz,
        refined,
        translation,
    ]
}
