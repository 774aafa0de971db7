//! Families used by the examples, the CLI configs and the acceptance suite.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::levy::{wrapped_cauchy, CauchyDiscretization, GeneratorFamily, JumpAtom, LevyQuadruple};

/// Physical half-length of the real line segment mapped onto `(-pi, pi]` for
/// the Cauchy example.
pub const CAUCHY_HALF_LENGTH: f64 = 256.0;
pub const CAUCHY_GAMMAS: [f64; 2] = [0.25, 0.5];

/// Uncertain volatility: Brownian motions with `sigma` in `{0.5, 1}`.
pub fn two_sigma() -> GeneratorFamily {
    GeneratorFamily::new(
        vec![LevyQuadruple::diffusion(0.5), LevyQuadruple::diffusion(1.0)],
        vec!["sigma=0.5".into(), "sigma=1".into()],
    )
    .expect("two diffusions form a family")
}

pub fn heat(sigma: f64) -> GeneratorFamily {
    GeneratorFamily::new(
        vec![LevyQuadruple::diffusion(sigma)],
        vec![format!("sigma={sigma}")],
    )
    .expect("singleton family")
}

/// Ambiguity between staying put and jumping by a half-turn at rate 1.
pub fn cp_pair() -> GeneratorFamily {
    GeneratorFamily::new(
        vec![
            LevyQuadruple::zero(1),
            LevyQuadruple::compound_poisson(1, vec![JumpAtom::new_1d(PI, 1.0)])
                .expect("valid atom"),
        ],
        vec!["still".into(), "half-turn".into()],
    )
    .expect("two members")
}

/// Compensated jumps `nu = h^{-2} delta_h`, whose generator tends to `f''/2`.
pub fn small_jumps(h: f64) -> Result<GeneratorFamily> {
    let q = LevyQuadruple::small_jumps(1, vec![JumpAtom::new_1d(h, 1.0 / (h * h))])?;
    GeneratorFamily::new(vec![q], vec![format!("h={h}")])
}

/// Rate-1 Cauchy jumps of physical scale `gamma`, on a torus standing for
/// `[-CAUCHY_HALF_LENGTH, CAUCHY_HALF_LENGTH]`.
pub fn cauchy(grid: &TorusGrid, gammas: &[f64]) -> Result<GeneratorFamily> {
    if gammas.is_empty() {
        return Err(Error::Config(
            "Cauchy family needs at least one scale".into(),
        ));
    }
    let members = gammas
        .iter()
        .map(|&g| {
            wrapped_cauchy(
                grid,
                g * PI / CAUCHY_HALF_LENGTH,
                1.0,
                CauchyDiscretization::CellAverage,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    GeneratorFamily::new(
        members,
        gammas.iter().map(|g| format!("gamma={g}")).collect(),
    )
}

/// Two anisotropic planar diffusions, one fast along each axis.
pub fn anisotropic_2d() -> GeneratorFamily {
    let diag = |a: f64, b: f64| {
        LevyQuadruple::new(2, [0.0; 2], [[a, 0.0], [0.0, b]], Vec::new(), Vec::new())
            .expect("diagonal PSD")
    };
    GeneratorFamily::new(
        vec![diag(1.0, 0.25), diag(0.25, 1.0)],
        vec!["fast-x".into(), "fast-y".into()],
    )
    .expect("two members")
}

/// Every shipped family that lives on a one-dimensional grid, by name.
pub fn catalogue_1d(grid: &TorusGrid) -> Result<Vec<(String, GeneratorFamily)>> {
    let mut out = vec![
        ("two_sigma".to_string(), two_sigma()),
        ("heat".to_string(), heat(1.0)),
        ("cp_pair".to_string(), cp_pair()),
        ("cauchy".to_string(), cauchy(grid, &CAUCHY_GAMMAS)?),
    ];
    for h in [0.1, 0.05] {
        out.push((format!("small_jumps_{h}"), small_jumps(h)?));
    }
    for &g in &CAUCHY_GAMMAS {
        out.push((format!("cauchy_{g}"), cauchy(grid, &[g])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_is_well_formed() {
        let g = TorusGrid::new(1, 256).unwrap();
        let cat = catalogue_1d(&g).unwrap();
        assert!(cat.iter().any(|(_, f)| f.len() == 1));
        for (name, fam) in &cat {
            assert_eq!(fam.dim(), 1, "{name}");
            assert_eq!(fam.labels().len(), fam.len());
        }
        assert_eq!(anisotropic_2d().dim(), 2);
        assert!(small_jumps(0.0).is_err());
    }

    #[test]
    fn cauchy_members_carry_unit_rate() {
        let g = TorusGrid::new(1, 256).unwrap();
        for m in cauchy(&g, &CAUCHY_GAMMAS).unwrap().members() {
            assert!((m.jump_mass() - 1.0).abs() < 1e-12);
        }
    }
}
