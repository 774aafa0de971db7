//! Levy quadruples `(b, Sigma, mu, nu)` on the torus, their symbols, and the
//! linear semigroups they generate.
//!
//! Two symbol schemes are available:
//!
//! * [`SymbolScheme::Continuum`] evaluates the continuum characteristic exponent
//!   `psi(k) = i<b,k> - <k,Sigma k>/2 + sum w (e^{i<k,y>} - 1) +
//!   sum v (e^{i<k,z>} - 1 - i<k,z>)` at the integer modes of the grid. It is
//!   exact on trigonometric polynomials but its kernels are not positive on the
//!   grid.
//! * [`SymbolScheme::Lattice`] replaces every term by the generator of a
//!   continuous-time random walk on `Z_n^d`: nearest-neighbour diffusion,
//!   central or upwind drift, jumps snapped to grid displacements. The kernels
//!   `exp(t psi)` are then exactly positive, so the sup-envelopes built from them
//!   are monotone operators on grid functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{wrap, wrap_point, GridFunction, TorusGrid, TorusPoint};

const SYMMETRY_TOL: f64 = 1e-12;
const RE_PSI_TOL: f64 = 1e-12;
const IMAG_RESIDUE_TOL: f64 = 1e-10;
/// Grids at least this large (points times members) are processed member-parallel.
const PARALLEL_WORK: usize = 1 << 15;

/// Point mass of a jump measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpAtom {
    pub position: TorusPoint,
    pub weight: f64,
}

impl JumpAtom {
    pub fn new_1d(y: f64, weight: f64) -> Self {
        JumpAtom {
            position: [y, 0.0],
            weight,
        }
    }
}

/// `(b, Sigma, mu, nu)`: drift, diffusion matrix, uncompensated finite jump
/// measure and linearly compensated jump measure, all with finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyQuadruple {
    dim: usize,
    drift: TorusPoint,
    sigma: [[f64; 2]; 2],
    mu: Vec<JumpAtom>,
    nu: Vec<JumpAtom>,
}

fn sym_eigenvalues(s: &[[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (s[0][0] + s[1][1]);
    let half_gap = (0.25 * (s[0][0] - s[1][1]).powi(2) + s[0][1] * s[0][1]).sqrt();
    (mean - half_gap, mean + half_gap)
}

impl LevyQuadruple {
    pub fn new(
        dim: usize,
        drift: TorusPoint,
        sigma: [[f64; 2]; 2],
        mu: Vec<JumpAtom>,
        nu: Vec<JumpAtom>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidQuadruple(msg));
        if !(1..=2).contains(&dim) {
            return bad(format!("dimension must be 1 or 2, got {dim}"));
        }
        let mut drift = drift;
        let mut sigma = sigma;
        if dim == 1 {
            drift[1] = 0.0;
            sigma = [[sigma[0][0], 0.0], [0.0, 0.0]];
        }
        if drift
            .iter()
            .chain(sigma.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return bad("non-finite drift or diffusion entry".into());
        }
        if (sigma[0][1] - sigma[1][0]).abs() > SYMMETRY_TOL {
            return bad(format!("Sigma is not symmetric: {sigma:?}"));
        }
        sigma[1][0] = sigma[0][1];
        let (lo, _) = sym_eigenvalues(&sigma);
        if lo < -SYMMETRY_TOL {
            return bad(format!("Sigma has negative eigenvalue {lo:e}"));
        }
        let clean = |atoms: Vec<JumpAtom>, what: &str, nonzero: bool| -> Result<Vec<JumpAtom>> {
            atoms
                .into_iter()
                .map(|a| {
                    if !(a.weight.is_finite() && a.weight > 0.0) {
                        return Err(Error::InvalidQuadruple(format!(
                            "{what} atom weight must be positive, got {}",
                            a.weight
                        )));
                    }
                    if a.position.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidQuadruple(format!(
                            "{what} atom position not finite"
                        )));
                    }
                    let mut p = wrap_point(a.position);
                    if dim == 1 {
                        p[1] = 0.0;
                    }
                    if nonzero && p.iter().all(|&v| v == 0.0) {
                        return Err(Error::InvalidQuadruple(format!(
                            "{what} has an atom at the origin"
                        )));
                    }
                    Ok(JumpAtom {
                        position: p,
                        weight: a.weight,
                    })
                })
                .collect()
        };
        let mu = clean(mu, "mu", false)?;
        let nu = clean(nu, "nu", true)?;
        Ok(LevyQuadruple {
            dim,
            drift,
            sigma,
            mu,
            nu,
        })
    }

    pub fn zero(dim: usize) -> Self {
        LevyQuadruple {
            dim,
            drift: [0.0; 2],
            sigma: [[0.0; 2]; 2],
            mu: Vec::new(),
            nu: Vec::new(),
        }
    }

    /// One-dimensional Brownian motion with volatility `sigma` (`Sigma = sigma^2`).
    pub fn diffusion(sigma: f64) -> Self {
        let mut q = LevyQuadruple::zero(1);
        q.sigma[0][0] = sigma * sigma;
        q
    }

    pub fn drift_1d(b: f64) -> Self {
        let mut q = LevyQuadruple::zero(1);
        q.drift[0] = b;
        q
    }

    pub fn compound_poisson(dim: usize, atoms: Vec<JumpAtom>) -> Result<Self> {
        LevyQuadruple::new(dim, [0.0; 2], [[0.0; 2]; 2], atoms, Vec::new())
    }

    pub fn small_jumps(dim: usize, atoms: Vec<JumpAtom>) -> Result<Self> {
        LevyQuadruple::new(dim, [0.0; 2], [[0.0; 2]; 2], Vec::new(), atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> TorusPoint {
        self.drift
    }

    pub fn sigma(&self) -> [[f64; 2]; 2] {
        self.sigma
    }

    pub fn mu(&self) -> &[JumpAtom] {
        &self.mu
    }

    pub fn nu(&self) -> &[JumpAtom] {
        &self.nu
    }

    /// `mu(T^d)`.
    pub fn jump_mass(&self) -> f64 {
        self.mu.iter().map(|a| a.weight).sum()
    }

    /// `int |z|^2 dnu(z)` with `z` taken in `(-pi, pi]^d`.
    pub fn nu_second_moment(&self) -> f64 {
        self.nu
            .iter()
            .map(|a| a.weight * (a.position[0].powi(2) + a.position[1].powi(2)))
            .sum()
    }

    pub fn sigma_trace_norm(&self) -> f64 {
        let (a, b) = sym_eigenvalues(&self.sigma);
        a.abs() + b.abs()
    }

    /// `|b| + |Sigma|_tr + mu(T^d) + int |z|^2 dnu`.
    pub fn size(&self) -> f64 {
        self.drift[0].hypot(self.drift[1])
            + self.sigma_trace_norm()
            + self.jump_mass()
            + self.nu_second_moment()
    }

    /// Copy with every atom moved to the nearest grid displacement; returns the
    /// largest snapping distance. `nu` atoms that snap to the origin are dropped.
    pub fn snapped(&self, grid: &TorusGrid) -> Result<(LevyQuadruple, f64)> {
        self.check_grid(grid)?;
        let h = grid.spacing();
        let mut dist: f64 = 0.0;
        let mut snap = |atoms: &[JumpAtom], keep_origin: bool| -> Vec<JumpAtom> {
            atoms
                .iter()
                .filter_map(|a| {
                    let (off, d) = grid.snap_displacement(a.position);
                    dist = dist.max(d);
                    if !keep_origin && off == [0, 0] {
                        return None;
                    }
                    Some(JumpAtom {
                        position: wrap_point([off[0] as f64 * h, off[1] as f64 * h]),
                        weight: a.weight,
                    })
                })
                .collect()
        };
        let mu = snap(&self.mu, true);
        let nu = snap(&self.nu, false);
        let q = LevyQuadruple::new(self.dim, self.drift, self.sigma, mu, nu)?;
        Ok((q, dist))
    }

    fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::Config(format!(
                "quadruple of dimension {} used on {grid}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// How a wrapped Cauchy jump law is put on grid atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyDiscretization {
    /// Density sampled at grid points (spectrally accurate when `gamma * n >> 1`).
    Sampled,
    /// Exact probability of each grid cell (robust when `gamma` is below the grid spacing).
    CellAverage,
}

/// Compound Poisson quadruple with rate `rate` and wrapped Cauchy jumps of scale
/// `gamma` (torus units), placed on the grid displacements. Characteristic
/// function of the jump law: `exp(-gamma |k|)`.
pub fn wrapped_cauchy(
    grid: &TorusGrid,
    gamma: f64,
    rate: f64,
    discretization: CauchyDiscretization,
) -> Result<LevyQuadruple> {
    if grid.dim() != 1 {
        return Err(Error::Config(
            "wrapped Cauchy jumps are one-dimensional".into(),
        ));
    }
    if !(gamma.is_finite() && gamma > 0.0 && rate.is_finite() && rate > 0.0) {
        return Err(Error::Config(format!(
            "wrapped Cauchy needs gamma > 0 and rate > 0, got {gamma}, {rate}"
        )));
    }
    let n = grid.n();
    let h = grid.spacing();
    let masses: Vec<f64> = match discretization {
        CauchyDiscretization::Sampled => {
            let sh = gamma.sinh();
            let s2 = (0.5 * gamma).sinh().powi(2);
            (0..n)
                .map(|j| {
                    let x = grid.coord(j);
                    // cosh(g) - cos(x) without cancellation
                    h * sh / (2.0 * PI * (2.0 * s2 + 2.0 * (0.5 * x).sin().powi(2)))
                })
                .collect()
        }
        CauchyDiscretization::CellAverage => {
            let coth = 1.0 / (0.5 * gamma).tanh();
            let cdf = |theta: f64| (coth * (0.5 * theta).tan()).atan() / PI;
            (0..n)
                .map(|j| {
                    let x = grid.coord(j);
                    if j == 0 {
                        // cell straddling +-pi
                        (0.5 - cdf(PI - 0.5 * h)) + (cdf(-PI + 0.5 * h) + 0.5)
                    } else {
                        cdf(x + 0.5 * h) - cdf(x - 0.5 * h)
                    }
                })
                .collect()
        }
    };
    let total: f64 = masses.iter().sum();
    let atoms = masses
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(j, &m)| JumpAtom::new_1d(grid.coord(j), rate * m / total))
        .collect();
    LevyQuadruple::compound_poisson(1, atoms)
}

/// A finite, nonempty index set of Levy quadruples.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorFamily {
    members: Vec<LevyQuadruple>,
    labels: Vec<String>,
}

impl GeneratorFamily {
    pub fn new(members: Vec<LevyQuadruple>, labels: Vec<String>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("generator family must be nonempty".into()));
        }
        if labels.len() != members.len() {
            return Err(Error::Config(format!(
                "{} labels for {} members",
                labels.len(),
                members.len()
            )));
        }
        let dim = members[0].dim;
        if members.iter().any(|q| q.dim != dim) {
            return Err(Error::Config(
                "family members have different dimensions".into(),
            ));
        }
        Ok(GeneratorFamily { members, labels })
    }

    /// Family with labels `lambda0`, `lambda1`, ...
    pub fn unlabelled(members: Vec<LevyQuadruple>) -> Result<Self> {
        let labels = (0..members.len()).map(|i| format!("lambda{i}")).collect();
        GeneratorFamily::new(members, labels)
    }

    pub fn singleton(q: LevyQuadruple) -> Self {
        GeneratorFamily {
            members: vec![q],
            labels: vec!["lambda0".into()],
        }
    }

    pub fn members(&self) -> &[LevyQuadruple] {
        &self.members
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let specs: Vec<QuadrupleSpec> = serde_json::from_str(text)?;
        GeneratorFamily::from_specs(&specs)
    }

    pub fn from_specs(specs: &[QuadrupleSpec]) -> Result<Self> {
        let mut members = Vec::with_capacity(specs.len());
        let mut labels = Vec::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            members.push(s.to_quadruple()?);
            labels.push(s.label.clone().unwrap_or_else(|| format!("lambda{i}")));
        }
        GeneratorFamily::new(members, labels)
    }

    pub fn to_specs(&self) -> Vec<QuadrupleSpec> {
        self.members
            .iter()
            .zip(&self.labels)
            .map(|(q, l)| QuadrupleSpec::from_quadruple(q, Some(l.clone())))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_specs())?)
    }
}

/// Largest `|b| + |Sigma|_tr + mu(T^d) + int |z|^2 dnu` over the family.
pub fn family_constant(fam: &GeneratorFamily) -> f64 {
    fam.members
        .iter()
        .map(LevyQuadruple::size)
        .fold(0.0, f64::max)
}

/// JSON form of a quadruple:
/// `{"b":[..], "sigma":[[..]], "mu":[{"y":[..],"w":..}], "nu":[{"z":[..],"v":..}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub b: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default)]
    pub mu: Vec<MuAtomSpec>,
    #[serde(default)]
    pub nu: Vec<NuAtomSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuAtomSpec {
    pub y: Vec<f64>,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuAtomSpec {
    pub z: Vec<f64>,
    pub v: f64,
}

impl QuadrupleSpec {
    pub fn to_quadruple(&self) -> Result<LevyQuadruple> {
        let dim = self.b.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidQuadruple(format!(
                "b must have 1 or 2 components, got {dim}"
            )));
        }
        if self.sigma.len() != dim || self.sigma.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidQuadruple(format!(
                "sigma must be {dim}x{dim}"
            )));
        }
        let point = |v: &[f64], what: &str| -> Result<TorusPoint> {
            if v.len() != dim {
                return Err(Error::InvalidQuadruple(format!(
                    "{what} atom has {} components, expected {dim}",
                    v.len()
                )));
            }
            let mut p = [0.0; 2];
            p[..dim].copy_from_slice(v);
            Ok(p)
        };
        let mut drift = [0.0; 2];
        drift[..dim].copy_from_slice(&self.b);
        let mut sigma = [[0.0; 2]; 2];
        for (row, src) in sigma.iter_mut().zip(&self.sigma) {
            row[..dim].copy_from_slice(&src[..dim]);
        }
        let mu = self
            .mu
            .iter()
            .map(|a| {
                Ok(JumpAtom {
                    position: point(&a.y, "mu")?,
                    weight: a.w,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let nu = self
            .nu
            .iter()
            .map(|a| {
                Ok(JumpAtom {
                    position: point(&a.z, "nu")?,
                    weight: a.v,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LevyQuadruple::new(dim, drift, sigma, mu, nu)
    }

    pub fn from_quadruple(q: &LevyQuadruple, label: Option<String>) -> Self {
        let d = q.dim;
        QuadrupleSpec {
            label,
            b: q.drift[..d].to_vec(),
            sigma: (0..d).map(|i| q.sigma[i][..d].to_vec()).collect(),
            mu: q
                .mu
                .iter()
                .map(|a| MuAtomSpec {
                    y: a.position[..d].to_vec(),
                    w: a.weight,
                })
                .collect(),
            nu: q
                .nu
                .iter()
                .map(|a| NuAtomSpec {
                    z: a.position[..d].to_vec(),
                    v: a.weight,
                })
                .collect(),
        }
    }
}

/// Which discretisation of the generators a [`SymbolTable`] uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolScheme {
    Continuum,
    #[default]
    Lattice,
}

/// `exp(i theta) - 1` without cancellation in the real part.
fn expm1_i(theta: f64) -> Complex64 {
    let s = (0.5 * theta).sin();
    Complex64::new(-2.0 * s * s, theta.sin())
}

/// Continuum characteristic exponent at every grid mode (FFT order),
/// symmetrised so that `psi(-k) = conj(psi(k))` holds bitwise, including the
/// Nyquist modes.
pub fn levy_symbol(q: &LevyQuadruple, grid: &TorusGrid) -> Result<Vec<Complex64>> {
    q.check_grid(grid)?;
    let raw: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let m = grid.mode(idx);
            let k = [m[0] as f64, m[1] as f64];
            let dot = |p: &TorusPoint| k[0] * p[0] + k[1] * p[1];
            let quad = k[0] * (q.sigma[0][0] * k[0] + q.sigma[0][1] * k[1])
                + k[1] * (q.sigma[1][0] * k[0] + q.sigma[1][1] * k[1]);
            let mut psi = Complex64::new(-0.5 * quad, dot(&q.drift));
            for a in &q.mu {
                psi += a.weight * expm1_i(dot(&a.position));
            }
            for a in &q.nu {
                let theta = dot(&a.position);
                let e = expm1_i(theta);
                psi += a.weight * Complex64::new(e.re, e.im - theta);
            }
            psi
        })
        .collect();
    let sym = (0..grid.len())
        .map(|idx| {
            let partner = raw[grid.conjugate_index(idx)];
            (raw[idx] + partner.conj()) * 0.5
        })
        .collect();
    Ok(sym)
}

/// Generator of a continuous-time random walk on the grid approximating `q`,
/// with the largest atom snapping distance.
///
/// Diffusion uses nearest neighbours along the axes plus one diagonal for the
/// off-diagonal entry of `Sigma` (which must be diagonally dominant). Drift is
/// central where the diffusion rate allows it and upwind otherwise. A `nu` atom
/// snapping to the origin is replaced by its covariance contribution
/// `v z z^T`; any other `nu` atom keeps its jump and moves its compensation
/// `-v z` into the drift.
pub fn lattice_symbol(q: &LevyQuadruple, grid: &TorusGrid) -> Result<(Vec<Complex64>, f64)> {
    q.check_grid(grid)?;
    let h = grid.spacing();
    let dim = q.dim;
    let mut sigma = q.sigma;
    let mut drift = q.drift;
    let mut jumps: Vec<([i64; 2], f64)> = Vec::new();
    let mut snap: f64 = 0.0;

    for a in &q.mu {
        let (off, d) = grid.snap_displacement(a.position);
        snap = snap.max(d);
        if off != [0, 0] {
            jumps.push((off, a.weight));
        }
    }
    for a in &q.nu {
        let (off, d) = grid.snap_displacement(a.position);
        snap = snap.max(d);
        if off == [0, 0] {
            let z = a.position;
            for i in 0..dim {
                for j in 0..dim {
                    sigma[i][j] += a.weight * z[i] * z[j];
                }
            }
        } else {
            jumps.push((off, a.weight));
            for i in 0..dim {
                drift[i] -= a.weight * off[i] as f64 * h;
            }
        }
    }

    let cross = if dim == 2 { sigma[0][1] } else { 0.0 };
    for axis in 0..dim {
        let diag = sigma[axis][axis] - cross.abs();
        if diag < -SYMMETRY_TOL {
            return Err(Error::InvalidQuadruple(format!(
                "lattice scheme needs a diagonally dominant Sigma, got {sigma:?}"
            )));
        }
        let rate = diag.max(0.0) / (2.0 * h * h);
        let b = drift[axis];
        let (plus, minus) = if rate >= b.abs() / (2.0 * h) {
            (rate + b / (2.0 * h), rate - b / (2.0 * h))
        } else {
            (rate + b.max(0.0) / h, rate + (-b).max(0.0) / h)
        };
        let mut e = [0i64; 2];
        e[axis] = 1;
        if plus > 0.0 {
            jumps.push((e, plus));
        }
        if minus > 0.0 {
            jumps.push(([-e[0], -e[1]], minus));
        }
    }
    if cross != 0.0 {
        let rate = cross.abs() / (2.0 * h * h);
        let s = cross.signum() as i64;
        jumps.push(([1, s], rate));
        jumps.push(([-1, -s], rate));
    }

    let n = grid.n() as i64;
    let psi = (0..grid.len())
        .map(|idx| {
            let m = grid.mode(idx);
            jumps
                .iter()
                .fold(Complex64::new(0.0, 0.0), |acc, (off, w)| {
                    let phase = grid.phase((m[0] * off[0] + m[1] * off[1]).rem_euclid(n));
                    acc + *w * (phase - 1.0)
                })
        })
        .collect();
    Ok((psi, snap))
}

/// Check `psi(0) = 0`, `Re psi <= 1e-12` and exact conjugate symmetry.
pub fn validate_symbol(member: usize, grid: &TorusGrid, psi: &[Complex64]) -> Result<()> {
    let fail = |idx: usize, reason: String| {
        Err(Error::Symbol {
            member,
            mode: grid.mode(idx),
            reason,
        })
    };
    if psi.len() != grid.len() {
        return Err(Error::Config(
            "symbol length does not match the grid".into(),
        ));
    }
    if psi[0] != Complex64::new(0.0, 0.0) {
        return fail(0, format!("psi(0) = {} is not zero", psi[0]));
    }
    for (idx, p) in psi.iter().enumerate() {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return fail(idx, "non-finite value".into());
        }
        if p.re > RE_PSI_TOL {
            return fail(idx, format!("positive real part {:e}", p.re));
        }
        if psi[grid.conjugate_index(idx)] != p.conj() {
            return fail(idx, "conjugate symmetry broken".into());
        }
    }
    Ok(())
}

/// Per-member symbols of a family on one grid.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    grid: TorusGrid,
    scheme: SymbolScheme,
    labels: Vec<String>,
    symbols: Vec<Vec<Complex64>>,
    snap_distance: f64,
    family_constant: f64,
    exec: Execution,
}

impl SymbolTable {
    pub fn new(fam: &GeneratorFamily, grid: &TorusGrid, scheme: SymbolScheme) -> Result<Self> {
        let mut symbols = Vec::with_capacity(fam.len());
        let mut snap: f64 = 0.0;
        for (i, q) in fam.members.iter().enumerate() {
            let psi = match scheme {
                SymbolScheme::Continuum => levy_symbol(q, grid)?,
                SymbolScheme::Lattice => {
                    let (psi, d) = lattice_symbol(q, grid)?;
                    snap = snap.max(d);
                    psi
                }
            };
            validate_symbol(i, grid, &psi)?;
            symbols.push(psi);
        }
        Ok(SymbolTable {
            grid: grid.clone(),
            scheme,
            labels: fam.labels.clone(),
            symbols,
            snap_distance: snap,
            family_constant: family_constant(fam),
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub(crate) fn member_execution(&self) -> Execution {
        if self.grid.len() * self.symbols.len() >= PARALLEL_WORK {
            self.exec
        } else {
            Execution::Sequential
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn scheme(&self) -> SymbolScheme {
        self.scheme
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, member: usize) -> &[Complex64] {
        &self.symbols[member]
    }

    pub fn symbols(&self) -> &[Vec<Complex64>] {
        &self.symbols
    }

    /// Largest atom snapping distance (lattice scheme; zero for continuum).
    pub fn snap_distance(&self) -> f64 {
        self.snap_distance
    }

    pub fn family_constant(&self) -> f64 {
        self.family_constant
    }

    /// `max_{lambda, k} |psi_lambda(k)|`.
    pub fn max_abs(&self) -> f64 {
        self.symbols
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Multipliers `exp(t psi_lambda)` for every member.
    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
        }
        let multipliers = self.member_execution().map_slice(&self.symbols, |psi| {
            psi.iter().map(|p| (p * t).exp()).collect()
        });
        Ok(Propagator { t, multipliers })
    }
}

/// Precomputed `exp(t psi_lambda)` for a fixed step `t`.
#[derive(Clone, Debug)]
pub struct Propagator {
    t: f64,
    multipliers: Vec<Vec<Complex64>>,
}

impl Propagator {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn multiplier(&self, member: usize) -> &[Complex64] {
        &self.multipliers[member]
    }

    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }
}

/// Multiply the raw spectrum `spec` of `f` by `mult` and return the real result.
pub(crate) fn apply_raw_multiplier(
    f: &GridFunction,
    spec: &[Complex64],
    mult: &[Complex64],
) -> Result<GridFunction> {
    let grid = f.grid();
    let buf: Vec<Complex64> = spec.iter().zip(mult).map(|(s, m)| s * m).collect();
    let (values, residue) = grid.raw_inverse_real(buf);
    // roundoff in the inverse transform scales with the largest multiplier
    let gain = mult.iter().map(|m| m.norm()).fold(1.0, f64::max);
    let tolerance = IMAG_RESIDUE_TOL * (1.0 + f.sup_norm()) * gain;
    if residue > tolerance {
        return Err(Error::ImaginaryResidue { residue, tolerance });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("semigroup output"));
    }
    Ok(GridFunction::from_parts_unchecked(grid.clone(), values))
}

fn check_symbol_len(symbol: &[Complex64], f: &GridFunction) -> Result<()> {
    if symbol.len() != f.len() {
        return Err(Error::Config(format!(
            "symbol with {} modes applied to a function with {} samples",
            symbol.len(),
            f.len()
        )));
    }
    Ok(())
}

/// `S_lambda(t) f`: the Fourier multiplier `exp(t psi)`.
pub fn apply_linear(symbol: &[Complex64], t: f64, f: &GridFunction) -> Result<GridFunction> {
    check_symbol_len(symbol, f)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 || f.is_constant() {
        return Ok(f.clone());
    }
    let mult: Vec<Complex64> = symbol.iter().map(|p| (p * t).exp()).collect();
    let spec = f.grid().raw_forward(f.values());
    apply_raw_multiplier(f, &spec, &mult)
}

/// `A_lambda f`: the Fourier multiplier `psi`.
pub fn generator_apply_single(symbol: &[Complex64], f: &GridFunction) -> Result<GridFunction> {
    check_symbol_len(symbol, f)?;
    if f.is_constant() {
        return GridFunction::constant(f.grid(), 0.0);
    }
    let spec = f.grid().raw_forward(f.values());
    apply_raw_multiplier(f, &spec, symbol)
}

struct JumpTable {
    rate: f64,
    cumulative: Vec<f64>,
    positions: Vec<TorusPoint>,
}

impl JumpTable {
    fn new(atoms: &[JumpAtom]) -> Self {
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.weight;
                acc
            })
            .collect();
        JumpTable {
            rate: acc,
            cumulative,
            positions: atoms.iter().map(|a| a.position).collect(),
        }
    }

    fn add_jumps<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut TorusPoint) {
        let mean = self.rate * dt;
        if mean <= 0.0 {
            return;
        }
        let count = Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0) as u64;
        for _ in 0..count {
            let u = rng.random::<f64>() * self.rate;
            let j = self
                .cumulative
                .partition_point(|&c| c <= u)
                .min(self.positions.len() - 1);
            out[0] += self.positions[j][0];
            out[1] += self.positions[j][1];
        }
    }
}

/// Exact sampler of the increment of the Levy process with quadruple `q`.
///
/// The increment over `dt` is `b dt + sqrt(Sigma) N sqrt(dt)` plus the
/// compound-Poisson sums of `mu` and `nu` atoms minus `dt sum v z`, wrapped to
/// `(-pi, pi]^d`. Jumps are drawn as one Poisson count at the total rate
/// followed by categorical atom choices, which has the same law as independent
/// per-atom counts.
pub struct IncrementSampler {
    dim: usize,
    drift: TorusPoint,
    sqrt_sigma: [[f64; 2]; 2],
    diffusive: bool,
    mu: JumpTable,
    nu: JumpTable,
}

/// Symmetric square root of a 2x2 positive semidefinite matrix.
fn sqrt_psd(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).max(0.0);
    let s = det.sqrt();
    let t = (m[0][0] + m[1][1] + 2.0 * s).max(0.0).sqrt();
    if t == 0.0 {
        return [[0.0; 2]; 2];
    }
    [
        [(m[0][0] + s) / t, m[0][1] / t],
        [m[1][0] / t, (m[1][1] + s) / t],
    ]
}

impl IncrementSampler {
    pub fn new(q: &LevyQuadruple) -> Self {
        let mut drift = q.drift;
        for a in &q.nu {
            drift[0] -= a.weight * a.position[0];
            drift[1] -= a.weight * a.position[1];
        }
        let sqrt_sigma = sqrt_psd(&q.sigma);
        IncrementSampler {
            dim: q.dim,
            drift,
            diffusive: sqrt_sigma.iter().flatten().any(|&v| v != 0.0),
            sqrt_sigma,
            mu: JumpTable::new(&q.mu),
            nu: JumpTable::new(&q.nu),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> TorusPoint {
        let mut x = [self.drift[0] * dt, self.drift[1] * dt];
        if self.diffusive {
            let scale = dt.sqrt();
            let mut g = [0.0; 2];
            for gi in g.iter_mut().take(self.dim) {
                *gi = rng.sample::<f64, _>(StandardNormal) * scale;
            }
            for (i, xi) in x.iter_mut().enumerate().take(self.dim) {
                *xi += self.sqrt_sigma[i][0] * g[0] + self.sqrt_sigma[i][1] * g[1];
            }
        }
        self.mu.add_jumps(dt, rng, &mut x);
        self.nu.add_jumps(dt, rng, &mut x);
        let mut out = [wrap(x[0]), 0.0];
        if self.dim == 2 {
            out[1] = wrap(x[1]);
        }
        out
    }
}

/// One increment of the Levy process of `q` over `dt`.
pub fn sample_increment<R: Rng + ?Sized>(q: &LevyQuadruple, dt: f64, rng: &mut R) -> TorusPoint {
    IncrementSampler::new(q).sample(dt, rng)
}
