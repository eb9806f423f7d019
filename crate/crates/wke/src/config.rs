//! Run configuration read from a TOML file. Every key has a default and the
//! resolved configuration is echoed into each run summary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wke_core::fields::{GridSpec, SpectralField, WeightRegime};
use wke_core::quadrature::{Backend, MCSampler, NodeSet, Proposal, RadialRule, SphereRule, TensorRule};
use wke_core::solver::SolverConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub regime: RegimeSection,
    pub grid: GridSection,
    pub quadrature: QuadratureSection,
    pub solver: SolverSection,
    pub io: IoSection,
    pub initial: InitialData,
    pub verify: VerifySection,
    pub equilibrium: EquilibriumSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            regime: RegimeSection::default(),
            grid: GridSection::default(),
            quadrature: QuadratureSection::default(),
            solver: SolverSection::default(),
            io: IoSection::default(),
            initial: InitialData::Gaussian {
                amplitude: 1.0,
                scale: 1.0,
            },
            verify: VerifySection::default(),
            equilibrium: EquilibriumSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeSection {
    /// Lebesgue exponent; `inf` is accepted.
    #[serde(with = "wke_core::fields::exponent")]
    pub r: f64,
    pub delta: f64,
}

impl Default for RegimeSection {
    fn default() -> Self {
        RegimeSection { r: 2.0, delta: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub rho_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 16, rho_max: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Tensor,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub backend: BackendKind,
    /// Gauss-Legendre order per radial panel.
    pub radial_order: usize,
    /// Panel breakpoints of the radial rule; the last one is `rho_max`.
    pub radial_breaks: Vec<f64>,
    /// `(n_theta, n_phi)` of the `k1` directions.
    pub directions: [usize; 2],
    /// `(n_theta, n_phi)` of the scattering sphere.
    pub sigma: [usize; 2],
    pub n_samples: usize,
    pub proposal_scale: f64,
    pub antithetic: bool,
    pub seed: u64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection {
            backend: BackendKind::Tensor,
            radial_order: 3,
            radial_breaks: vec![0.0, 2.0, 4.0, 8.0],
            directions: [3, 6],
            sigma: [4, 6],
            n_samples: 4096,
            proposal_scale: 2.0,
            antithetic: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Sub-steps per horizon.
    pub substeps: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub ks_tol: f64,
    pub ks_max_steps: usize,
    /// Overrides the estimated cubic constant.
    pub c_hat: Option<f64>,
    /// Fields in the family used to estimate the constant.
    pub family_size: usize,
    /// Probe grid for the estimate.
    pub family_grid: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            substeps: 8,
            tol: 1e-10,
            max_iterations: 60,
            ks_tol: 1e-10,
            ks_max_steps: 60,
            c_hat: None,
            family_size: 6,
            family_grid: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub out: PathBuf,
    pub checkpoint: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            out: PathBuf::from("out"),
            checkpoint: true,
        }
    }
}

/// Initial spectrum, also accepted on the command line as `rj:MU`,
/// `gaussian:A,S`, `zero` or `file:PATH`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Rj { mu: f64 },
    Gaussian { amplitude: f64, scale: f64 },
    Zero,
    File { path: PathBuf },
}

impl InitialData {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>, CliError> {
            rest.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::config(format!("bad number in `{s}`"))))
                .collect()
        };
        match kind {
            "rj" => match nums()?.as_slice() {
                [mu] => Ok(InitialData::Rj { mu: *mu }),
                _ => Err(CliError::config("rj expects one parameter")),
            },
            "gaussian" => match nums()?.as_slice() {
                [a, s] => Ok(InitialData::Gaussian {
                    amplitude: *a,
                    scale: *s,
                }),
                _ => Err(CliError::config("gaussian expects amplitude,scale")),
            },
            "zero" => Ok(InitialData::Zero),
            "file" if !rest.is_empty() => Ok(InitialData::File {
                path: PathBuf::from(rest),
            }),
            _ => Err(CliError::config(format!("unknown initial data `{s}`"))),
        }
    }

    pub fn build(&self) -> Result<SpectralField, CliError> {
        Ok(match self {
            InitialData::Rj { mu } => SpectralField::rayleigh_jeans(*mu)?,
            InitialData::Gaussian { amplitude, scale } => SpectralField::gaussian(*amplitude, *scale)?,
            InitialData::Zero => SpectralField::zero(),
            InitialData::File { path } => SpectralField::grid(crate::io::read_field(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub geometry_samples: usize,
    pub jacobian_samples: usize,
    pub averaging_samples: usize,
    pub averaging_l: Vec<f64>,
    pub precollisional_probes: usize,
    pub precollisional_alpha: f64,
    pub precollisional_p: f64,
    pub cov_samples: usize,
    pub embedding_fields: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            geometry_samples: 100_000,
            jacobian_samples: 10_000,
            averaging_samples: 300,
            averaging_l: vec![2.5, 3.0, 4.0],
            precollisional_probes: 4,
            precollisional_alpha: 0.75,
            precollisional_p: 2.0,
            cov_samples: 200_000,
            embedding_fields: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    pub mu: Vec<f64>,
    pub probes: usize,
    pub tolerance: f64,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        EquilibriumSection {
            mu: vec![0.1, 1.0, 10.0],
            probes: 20,
            tolerance: 1e-9,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), CliError> {
        self.regime()?;
        self.grid()?;
        if self.solver.substeps == 0 {
            return Err(CliError::config("solver.substeps must be at least 1"));
        }
        if let Some(c) = self.solver.c_hat {
            if !(c > 0.0 && c.is_finite()) {
                return Err(CliError::config("solver.c_hat must be positive"));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Result<WeightRegime, CliError> {
        Ok(WeightRegime::new(self.regime.r, self.regime.delta)?)
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        Ok(GridSpec::new(self.grid.n, self.grid.rho_max)?)
    }

    pub fn backend(&self) -> Result<Backend, CliError> {
        let q = &self.quadrature;
        Ok(match q.backend {
            BackendKind::Tensor => Backend::Tensor(TensorRule::new(
                RadialRule::composite(q.radial_order, &q.radial_breaks)?,
                SphereRule::product(q.directions[0], q.directions[1])?,
                (q.sigma[0], q.sigma[1]),
            )?),
            BackendKind::MonteCarlo => Backend::MonteCarlo(MCSampler {
                seed: q.seed,
                n_samples: q.n_samples,
                proposal: Proposal::Gaussian {
                    scale: q.proposal_scale,
                },
                antithetic: q.antithetic,
                rho_max: q.radial_breaks.last().copied().unwrap_or(8.0),
            }),
        })
    }

    pub fn nodes(&self) -> Result<NodeSet, CliError> {
        Ok(NodeSet::build(&self.backend()?)?)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            substeps: self.solver.substeps,
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            ks_tol: self.solver.ks_tol,
            ks_max_steps: self.solver.ks_max_steps,
            ..SolverConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("[regime]\nr = \"inf\"\ndelta = 0.5\n").unwrap();
        assert!(cfg.regime.r.is_infinite());
        assert_eq!(cfg.grid, GridSection::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn regime_violation_is_a_config_error() {
        let cfg: RunConfig = toml::from_str("[regime]\nr = 2.0\ndelta = 0.7\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn initial_data_parsing() {
        assert_eq!(InitialData::parse("rj:1.5").unwrap(), InitialData::Rj { mu: 1.5 });
        assert_eq!(
            InitialData::parse("gaussian:2,0.5").unwrap(),
            InitialData::Gaussian {
                amplitude: 2.0,
                scale: 0.5
            }
        );
        assert!(InitialData::parse("gaussian:2").is_err());
        assert!(InitialData::parse("cauchy:1").is_err());
    }
}
