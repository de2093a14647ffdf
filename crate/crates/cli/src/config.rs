//! JSON configuration: system description plus numerics, validated on load.
//! Unknown keys are rejected so typos fail fast.

use std::path::Path;

use serde::Deserialize;

use pucci_core::grid2d::Grid2D;
use pucci_core::nonlinearity::{builtin_combustion, Domain, Nonlinearity, SystemSpec};
use pucci_core::pucci::EllipticityPair;
use pucci_core::Numerics;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "cannot parse config: {e}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub equations: Vec<EquationCfg>,
    pub domain: DomainCfg,
    pub nonlinearity: NonlinearityCfg,
    #[serde(default)]
    pub numerics: NumericsCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationCfg {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum DomainCfg {
    #[serde(rename = "ball")]
    Ball {
        #[serde(rename = "R")]
        r: f64,
        #[serde(rename = "N")]
        dim: usize,
    },
    #[serde(rename = "grid2d")]
    Grid2d {
        h: f64,
        #[serde(rename = "K")]
        k: usize,
        #[serde(default)]
        shape: Option<ShapeCfg>,
        #[serde(default)]
        mask_file: Option<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum ShapeCfg {
    Disc { radius: f64 },
    Square { side: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum NonlinearityCfg {
    Builtin {
        builtin: String,
        tau: f64,
        alphas: Vec<f64>,
    },
    Expressions {
        expressions: Vec<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsCfg {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_tol_cert")]
    pub tol_cert: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_m() -> usize {
    4096
}
fn default_tol() -> f64 {
    1e-8
}
fn default_tol_cert() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    10_000
}
fn default_seed() -> u64 {
    pucci_core::DEFAULT_SEED
}

impl Default for NumericsCfg {
    fn default() -> Self {
        NumericsCfg {
            m: default_m(),
            tol: default_tol(),
            tol_cert: default_tol_cert(),
            max_iter: default_max_iter(),
            seed: default_seed(),
        }
    }
}

/// A validated configuration: the system spec plus solver numerics.
pub struct Loaded {
    pub spec: SystemSpec,
    pub numerics: Numerics,
}

impl Config {
    pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        let config: Config = serde_json::from_str(&text).map_err(ConfigError::Parse)?;
        config.build(path)
    }

    fn build(self, config_path: &Path) -> Result<Loaded, ConfigError> {
        let n = self.n;
        if n == 0 {
            return Err(ConfigError::Invalid("n must be at least 1".into()));
        }
        if self.equations.len() != n {
            return Err(ConfigError::Invalid(format!(
                "expected {n} equations, found {}",
                self.equations.len()
            )));
        }
        let pairs = self
            .equations
            .iter()
            .map(|e| EllipticityPair::new(e.lambda, e.big_lambda))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let f: Nonlinearity = match &self.nonlinearity {
            NonlinearityCfg::Builtin { builtin, tau, alphas } => {
                if builtin != "combustion" {
                    return Err(ConfigError::Invalid(format!(
                        "unknown builtin nonlinearity `{builtin}`"
                    )));
                }
                builtin_combustion(n, *tau, alphas)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            NonlinearityCfg::Expressions { expressions } => {
                if expressions.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "expected {n} expressions, found {}",
                        expressions.len()
                    )));
                }
                Nonlinearity::from_expressions(expressions)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
        };

        let domain = match &self.domain {
            DomainCfg::Ball { r, dim } => Domain::Ball { r: *r, dim: *dim },
            DomainCfg::Grid2d { h, k, shape, mask_file } => {
                let grid = match (shape, mask_file) {
                    (Some(shape), None) => match shape {
                        ShapeCfg::Disc { radius } => Grid2D::disc(*radius, *h, *k)
                            .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                        ShapeCfg::Square { side } => {
                            Grid2D::from_region(*h, *k, *side, *side, |_, _| true)
                                .map_err(|e| ConfigError::Invalid(e.to_string()))?
                        }
                    },
                    (None, Some(file)) => {
                        let mask_path = config_path
                            .parent()
                            .map(|p| p.join(file))
                            .unwrap_or_else(|| file.into());
                        let text =
                            std::fs::read_to_string(&mask_path).map_err(ConfigError::Io)?;
                        Grid2D::from_mask_text(&text, *h, *k)
                            .map_err(|e| ConfigError::Invalid(e.to_string()))?
                    }
                    _ => {
                        return Err(ConfigError::Invalid(
                            "grid2d domain needs exactly one of `shape` or `mask_file`".into(),
                        ))
                    }
                };
                Domain::Grid2d(grid)
            }
        };

        let spec = SystemSpec::new(pairs, f, domain)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.numerics.m >= 16) {
            return Err(ConfigError::Invalid("numerics.M must be at least 16".into()));
        }
        if !(self.numerics.tol > 0.0 && self.numerics.tol_cert > 0.0) {
            return Err(ConfigError::Invalid("tolerances must be positive".into()));
        }
        let numerics = Numerics {
            m: self.numerics.m,
            tol: self.numerics.tol,
            max_iter: self.numerics.max_iter,
            seed: self.numerics.seed,
            cert_scale: self.numerics.tol_cert,
        };
        Ok(Loaded { spec, numerics })
    }
}
