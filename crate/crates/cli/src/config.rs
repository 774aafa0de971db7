//! The single JSON document that drives a run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nisio_core::levy::QuadrupleSpec;
use nisio_core::shipped;
use nisio_core::{GeneratorFamily, InitialFunction, NisioOptions, SymbolScheme, TorusGrid};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
}

/// Where the generator family comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Inline(Vec<QuadrupleSpec>),
    /// JSON file holding a list of quadruples.
    File(PathBuf),
    /// One of `two_sigma`, `heat`, `cp_pair`, `cauchy`, `anisotropic_2d`.
    Shipped(String),
    /// Rate-1 Cauchy jumps at the given physical scales.
    WrappedCauchy {
        gammas: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub dt: f64,
    pub tail_tol: f64,
    /// Largest accepted sup-distance between the envelope limit and RK4.
    pub gap_tol: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            dt: 1e-3,
            tail_tol: 1e-10,
            gap_tol: 5e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub h_list: Vec<f64>,
    pub dpp_levels: Vec<usize>,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            h_list: vec![0.1, 0.05, 0.025, 0.0125],
            dpp_levels: vec![4, 6, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub n_paths: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    /// Number of random feedback strategies tried next to the extracted one.
    pub random_strategies: usize,
    /// Random strategies use dyadic partitions of level `0..=random_max_level`.
    pub random_max_level: usize,
    /// Extra strategies in the strategy JSON format.
    pub strategy_files: Vec<PathBuf>,
    /// Largest acceptable scheme tolerance.
    pub scheme_tol_budget: f64,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            n_paths: 10_000,
            seed: 1,
            x0: vec![0.0],
            random_strategies: 16,
            random_max_level: 5,
            strategy_files: Vec::new(),
            scheme_tol_budget: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub family: FamilySpec,
    #[serde(default)]
    pub scheme: SymbolScheme,
    pub initial: InitialFunction,
    pub t: f64,
    #[serde(default)]
    pub nisio: NisioOptions,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parse, make relative paths (including `output_dir`) relative to the
    /// config file, and validate.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let FamilySpec::File(p) = &mut cfg.family {
            *p = resolve(base, p);
        }
        if let InitialFunction::File { path } = &mut cfg.initial {
            *path = resolve(base, path);
        }
        for p in &mut cfg.mc.strategy_files {
            *p = resolve(base, p);
        }
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        TorusGrid::new(self.grid.dim, self.grid.n).map_err(|e| bad(e.to_string()))?;
        if !(self.t.is_finite() && self.t > 0.0 && self.t <= 10.0) {
            return Err(bad(format!("t must lie in (0, 10], got {}", self.t)));
        }
        if self.nisio.max_level > nisio_core::nisio::MAX_LEVEL {
            return Err(bad(format!(
                "nisio.max_level above {}",
                nisio_core::nisio::MAX_LEVEL
            )));
        }
        if !(self.nisio.tol.is_finite() && self.nisio.tol >= 0.0) {
            return Err(bad("nisio.tol must be >= 0"));
        }
        let o = &self.oracle;
        if !(o.dt > 0.0 && o.dt.is_finite() && o.tail_tol > 0.0 && o.gap_tol >= 0.0) {
            return Err(bad("oracle needs dt > 0, tail_tol > 0, gap_tol >= 0"));
        }
        let h = &self.convergence.h_list;
        if h.iter().any(|v| !(v.is_finite() && *v > 0.0)) || h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad(
                "convergence.h_list must be positive and strictly decreasing",
            ));
        }
        if self.mc.x0.len() != self.grid.dim {
            return Err(bad(format!("mc.x0 needs {} components", self.grid.dim)));
        }
        if self.mc.n_paths < nisio_core::mc::MIN_PATHS {
            return Err(bad(format!(
                "mc.n_paths must be at least {}",
                nisio_core::mc::MIN_PATHS
            )));
        }
        let mut files: Vec<&PathBuf> = self.mc.strategy_files.iter().collect();
        if let FamilySpec::File(p) = &self.family {
            files.push(p);
        }
        if let InitialFunction::File { path } = &self.initial {
            files.push(path);
        }
        if let Some(missing) = files.into_iter().find(|p| !p.is_file()) {
            return Err(bad(format!("file not found: {}", missing.display())));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid, CliError> {
        TorusGrid::new(self.grid.dim, self.grid.n).map_err(|e| bad(e.to_string()))
    }

    pub fn family(&self, grid: &TorusGrid) -> Result<GeneratorFamily, CliError> {
        let fam = match &self.family {
            FamilySpec::Inline(specs) => GeneratorFamily::from_specs(specs)?,
            FamilySpec::File(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| bad(format!("cannot read {}: {e}", p.display())))?;
                GeneratorFamily::from_json(&text)?
            }
            FamilySpec::Shipped(name) => match name.as_str() {
                "two_sigma" => shipped::two_sigma(),
                "heat" => shipped::heat(1.0),
                "cp_pair" => shipped::cp_pair(),
                "cauchy" => shipped::cauchy(grid, &shipped::CAUCHY_GAMMAS)?,
                "anisotropic_2d" => shipped::anisotropic_2d(),
                other => return Err(bad(format!("unknown shipped family {other:?}"))),
            },
            FamilySpec::WrappedCauchy { gammas } => shipped::cauchy(grid, gammas)?,
        };
        if fam.dim() != grid.dim() {
            return Err(bad(format!(
                "family is {}-dimensional, grid is {}-dimensional",
                fam.dim(),
                grid.dim()
            )));
        }
        Ok(fam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "grid": {"dim": 1, "n": 64},
        "family": {"inline": [{"b": [0], "sigma": [[0.25]]}, {"b": [0], "sigma": [[1]]}]},
        "initial": {"kind": "bump", "center": [0], "width": 1.5},
        "t": 0.2
    }"#;

    #[test]
    fn defaults_and_round_trip() {
        let cfg: RunConfig = serde_json::from_str(EXAMPLE).unwrap();
        assert_eq!(cfg.scheme, SymbolScheme::Lattice);
        assert_eq!(cfg.nisio, NisioOptions::default());
        assert_eq!(cfg.oracle.dt, 1e-3);
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let g = cfg.grid().unwrap();
        assert_eq!(cfg.family(&g).unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg: RunConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.t = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.mc.x0 = vec![0.0, 0.0];
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.family = FamilySpec::File("/nonexistent/family.json".into());
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.family = FamilySpec::Shipped("nope".into());
        assert!(cfg.family(&cfg.grid().unwrap()).is_err());
        assert!(
            serde_json::from_str::<RunConfig>(&EXAMPLE.replace("\"t\"", "\"horizon\"")).is_err()
        );
    }
}
