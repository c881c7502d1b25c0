//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//! replicas = 20
//! experiment = "slope"
//! output = "out/linear"
//! ics = [{ x = [1.0, 1.0] }]
//!
//! [sim]
//! dt = 0.001
//! t_final = 20.0
//!
//! [model]
//! name = "linear"
//! a = [[-1.0, 0.0], [0.0, -3.0]]
//! sigma = [[0.0, 0.0], [0.0, 0.0]]
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrators::SimConfig;
use crate::models::ecological::DEFAULT_INNER_SAMPLES;
use crate::models::{self, EcoParams, LorenzParams, ModelBundle, SisNoise, SisParams, MODEL_NAMES};
use crate::process::StateVector;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    BoundaryExponent,
    Slope,
    Criterion,
    RobustnessScan,
    Diagnostics,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::BoundaryExponent => "boundary-exponent",
            Experiment::Slope => "slope",
            Experiment::Criterion => "criterion",
            Experiment::RobustnessScan => "robustness-scan",
            Experiment::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<usize>,
}

impl From<&InitialCondition> for StateVector {
    fn from(ic: &InitialCondition) -> Self {
        StateVector {
            x: ic.x.clone(),
            regime: ic.regime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOptions {
    /// Trailing fraction of each run used by slope fits.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Slack below `alpha_candidate` still counted as extinction.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Sample points per initial condition for diagnostics.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

fn default_window() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    0.05
}

fn default_points() -> usize {
    100
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            window: default_window(),
            tol: default_tol(),
            points: default_points(),
            scan: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Sis {
        /// One adjacency matrix per regime.
        adjacency: Vec<Matrix>,
        beta: Vec<f64>,
        delta: Vec<f64>,
        /// Per-regime `κ` in `σ(x) = κx`; zero noise when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        switch_rates: Option<Matrix>,
    },
    Lorenz {
        gamma: f64,
        z_star: f64,
        eta: f64,
        alpha0: f64,
    },
    EcoDiscrete {
        r: Vec<f64>,
        a: Matrix,
        sigma: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inner_samples: Option<usize>,
    },
    Kolmogorov {
        r: Vec<f64>,
        interactions: Matrix,
        g: Vec<f64>,
        /// `d × n` matrix `A` with `E = AᵀB`.
        noise: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Linear {
        a: Matrix,
        sigma: Matrix,
    },
}

fn matrix(m: &Matrix, what: &str) -> Result<DMatrix<f64>, ConfigError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::Invalid(format!(
            "`{what}` must be a non-empty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| m[i][j]))
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Sis { .. } => "sis",
            ModelConfig::Lorenz { .. } => "lorenz",
            ModelConfig::EcoDiscrete { .. } => "eco-discrete",
            ModelConfig::Kolmogorov { .. } => "kolmogorov",
            ModelConfig::Linear { .. } => "linear",
        }
    }

    pub fn sis_params(&self) -> Option<Result<SisParams, ConfigError>> {
        let ModelConfig::Sis {
            adjacency,
            beta,
            delta,
            noise,
            switch_rates,
        } = self
        else {
            return None;
        };
        Some((|| {
            Ok(SisParams {
                adjacency: adjacency
                    .iter()
                    .map(|a| matrix(a, "adjacency"))
                    .collect::<Result<_, _>>()?,
                beta: beta.clone(),
                delta: delta.clone(),
                noise: noise.clone().map_or(SisNoise::Zero, SisNoise::Linear),
                q: switch_rates
                    .as_ref()
                    .map(|q| matrix(q, "switch_rates"))
                    .transpose()?,
            })
        })())
    }

    pub fn lorenz_params(&self) -> Option<LorenzParams> {
        match *self {
            ModelConfig::Lorenz {
                gamma,
                z_star,
                eta,
                alpha0,
            } => Some(LorenzParams::new(gamma, z_star, eta, alpha0)),
            _ => None,
        }
    }

    /// Builds the model bundle.
    pub fn build(&self) -> Result<ModelBundle, BuildError> {
        Ok(match self {
            ModelConfig::Sis { .. } => models::make_sis(&self.sis_params().expect("sis config")?)?,
            ModelConfig::Lorenz { .. } => {
                models::make_lorenz(&self.lorenz_params().expect("lorenz config"))?
            }
            ModelConfig::EcoDiscrete {
                r,
                a,
                sigma,
                weights,
                inner_samples,
            } => EcoParams {
                r: r.clone(),
                a: matrix(a, "a")?,
                sigma: sigma.clone(),
                p: weights.clone(),
                inner_samples: inner_samples.unwrap_or(DEFAULT_INNER_SAMPLES),
            }
            .bundle()?,
            ModelConfig::Kolmogorov {
                r,
                interactions,
                g,
                noise,
                weights,
            } => {
                let p = weights.clone().unwrap_or_else(|| vec![1.0; r.len()]);
                models::lotka_volterra_sde(
                    r,
                    &matrix(interactions, "interactions")?,
                    g,
                    &matrix(noise, "noise")?,
                    &p,
                )?
            }
            ModelConfig::Linear { a, sigma } => {
                models::make_linear_sde(&matrix(a, "a")?, &matrix(sigma, "sigma")?)?
            }
        })
    }

    /// Scalar parameters that a robustness scan may vary.
    pub fn scan_parameters(&self) -> &'static [&'static str] {
        match self {
            ModelConfig::Sis { .. } => &["beta", "delta", "noise"],
            ModelConfig::Lorenz { .. } => &["gamma", "z_star", "eta", "alpha0"],
            ModelConfig::EcoDiscrete { .. } => &["r", "sigma"],
            ModelConfig::Kolmogorov { .. } => &["r", "g"],
            ModelConfig::Linear { .. } => &["sigma_scale"],
        }
    }

    /// Copy with the named scalar parameter set to `value` (in every regime
    /// or species for vector parameters; `sigma_scale` multiplies the noise
    /// matrix of the linear model).
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<ModelConfig, ConfigError> {
        let mut out = self.clone();
        let fill = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = value);
        match (&mut out, name) {
            (ModelConfig::Sis { beta, .. }, "beta") => fill(beta),
            (ModelConfig::Sis { delta, .. }, "delta") => fill(delta),
            (ModelConfig::Sis { noise, beta, .. }, "noise") => {
                *noise = Some(vec![value; beta.len()])
            }
            (ModelConfig::Lorenz { gamma, .. }, "gamma") => *gamma = value,
            (ModelConfig::Lorenz { z_star, .. }, "z_star") => *z_star = value,
            (ModelConfig::Lorenz { eta, .. }, "eta") => *eta = value,
            (ModelConfig::Lorenz { alpha0, .. }, "alpha0") => *alpha0 = value,
            (ModelConfig::EcoDiscrete { r, .. }, "r")
            | (ModelConfig::Kolmogorov { r, .. }, "r") => fill(r),
            (ModelConfig::EcoDiscrete { sigma, .. }, "sigma") => fill(sigma),
            (ModelConfig::Kolmogorov { g, .. }, "g") => fill(g),
            (ModelConfig::Linear { sigma, .. }, "sigma_scale") => {
                sigma.iter_mut().flatten().for_each(|x| *x *= value);
            }
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "model `{}` has no scan parameter `{name}` (expected one of {:?})",
                    self.name(),
                    self.scan_parameters()
                )))
            }
        }
        Ok(out)
    }
}

/// Failure to turn a valid config into a model.
#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] crate::error::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicas: usize,
    pub experiment: Experiment,
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ics: Vec<InitialCondition>,
    #[serde(default)]
    pub options: ExperimentOptions,
    pub sim: SimConfig,
    pub model: ModelConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicas == 0 {
            return Err(ConfigError::Invalid("replicas must be at least 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::Invalid(
                "seed must fit in a signed 64-bit TOML integer".into(),
            ));
        }
        self.sim
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let o = &self.options;
        if !(o.window > 0.0 && o.window <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "window {} must lie in (0, 1]",
                o.window
            )));
        }
        if !(o.tol.is_finite() && o.tol >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "tol {} must be non-negative",
                o.tol
            )));
        }
        if o.points == 0 {
            return Err(ConfigError::Invalid("points must be at least 1".into()));
        }
        if self.experiment == Experiment::RobustnessScan {
            let scan = o.scan.as_ref().ok_or_else(|| {
                ConfigError::Invalid("robustness-scan needs [options.scan]".into())
            })?;
            if scan.values.is_empty() {
                return Err(ConfigError::Invalid("scan values are empty".into()));
            }
            self.model.with_parameter(&scan.parameter, scan.values[0])?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |p| before.len() - p - 1)
        + 1;
    (line, column)
}

fn backticked(message: &str, prefix: &str) -> Option<String> {
    let rest = &message[message.find(prefix)? + prefix.len()..];
    let rest = rest.strip_prefix('`')?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Parses and validates a config from TOML text.
pub fn parse_config_str(src: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = src.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if let Some(name) = table
        .get("model")
        .and_then(|m| m.get("name"))
        .and_then(|n| n.as_str())
    {
        if !MODEL_NAMES.contains(&name) {
            return Err(ConfigError::UnknownModel(name.to_string()));
        }
    }
    let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
        let message = e.message().to_string();
        if let Some(key) = backticked(&message, "unknown field ") {
            return ConfigError::UnknownKey(key);
        }
        if message.contains("missing field") {
            return ConfigError::Invalid(message);
        }
        let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
        ConfigError::Parse {
            line,
            column,
            message,
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SIS: &str = r#"
seed = 1
replicas = 4
experiment = "criterion"
output = "out"

[sim]
dt = 0.001
t_final = 10.0

[model]
name = "sis"
adjacency = [[[0.0, 1.0], [1.0, 0.0]]]
beta = [0.3]
delta = [1.0]
"#;

    #[test]
    fn minimal_sis_config() {
        let cfg = parse_config_str(SIS).unwrap();
        assert_eq!(cfg.experiment, Experiment::Criterion);
        assert_eq!(cfg.model.name(), "sis");
        assert_eq!(cfg.options, ExperimentOptions::default());
        let b = cfg.model.build().unwrap();
        assert!((b.suite.alpha_candidate - 0.7).abs() < 1e-12);
    }

    #[test]
    fn misspelled_key() {
        let src = SIS.replace("replicas = 4", "replcas = 4");
        assert_eq!(
            parse_config_str(&src),
            Err(ConfigError::UnknownKey("replcas".into()))
        );
        let src = SIS.replace("beta = [0.3]", "beta = [0.3]\nbeat = 1.0");
        assert_eq!(
            parse_config_str(&src),
            Err(ConfigError::UnknownKey("beat".into()))
        );
    }

    #[test]
    fn missing_seed() {
        let src = SIS.replace("seed = 1\n", "");
        assert!(
            matches!(parse_config_str(&src), Err(ConfigError::Invalid(m)) if m.contains("seed"))
        );
    }

    #[test]
    fn unknown_model_and_syntax_errors() {
        let src = SIS.replace("name = \"sis\"", "name = \"sir\"");
        assert_eq!(
            parse_config_str(&src),
            Err(ConfigError::UnknownModel("sir".into()))
        );
        let src = SIS.replace("dt = 0.001", "dt = = 0.001");
        match parse_config_str(&src) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_regime_rates_validated() {
        let src = SIS
            .replace(
                "adjacency = [[[0.0, 1.0], [1.0, 0.0]]]",
                "adjacency = [[[0.0, 1.0], [1.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]]]",
            )
            .replace("beta = [0.3]", "beta = [0.3, 0.5]")
            .replace(
                "delta = [1.0]",
                "delta = [1.0, 1.0]\nswitch_rates = [[-1.0, 1.1], [1.0, -1.0]]",
            );
        let cfg = parse_config_str(&src).unwrap();
        assert!(matches!(
            cfg.model.build(),
            Err(BuildError::Model(crate::error::Error::InvalidRateMatrix(_)))
        ));
    }

    #[test]
    fn scan_parameter_must_exist() {
        let mut cfg = parse_config_str(SIS).unwrap();
        cfg.experiment = Experiment::RobustnessScan;
        assert!(cfg.validate().is_err());
        cfg.options.scan = Some(ScanConfig {
            parameter: "gamma".into(),
            values: vec![0.1],
        });
        assert!(cfg.validate().is_err());
        cfg.options.scan.as_mut().unwrap().parameter = "beta".into();
        cfg.validate().unwrap();
    }

    fn finite() -> impl Strategy<Value = f64> {
        -1e6f64..1e6
    }

    fn model_strategy() -> impl Strategy<Value = ModelConfig> {
        prop_oneof![
            (finite(), finite(), finite(), finite()).prop_map(|(gamma, z_star, eta, alpha0)| {
                ModelConfig::Lorenz {
                    gamma,
                    z_star,
                    eta,
                    alpha0,
                }
            }),
            (
                prop::collection::vec(finite(), 1..4),
                prop::option::of(prop::collection::vec(finite(), 1..3))
            )
                .prop_map(|(beta, noise)| ModelConfig::Sis {
                    adjacency: vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
                    delta: beta.clone(),
                    beta,
                    noise,
                    switch_rates: None,
                }),
            (
                prop::collection::vec(finite(), 1..3),
                prop::option::of(1usize..100)
            )
                .prop_map(|(r, inner_samples)| {
                    ModelConfig::EcoDiscrete {
                        a: vec![r.clone(); r.len()],
                        sigma: r.clone(),
                        weights: None,
                        inner_samples,
                        r,
                    }
                }),
            prop::collection::vec(finite(), 1..3).prop_map(|r| ModelConfig::Kolmogorov {
                interactions: vec![r.clone(); r.len()],
                g: r.clone(),
                noise: vec![r.clone()],
                weights: Some(r.clone()),
                r,
            }),
            finite().prop_map(|a| ModelConfig::Linear {
                a: vec![vec![a]],
                sigma: vec![vec![-a]]
            }),
        ]
    }

    proptest! {
        #[test]
        fn toml_round_trip(
            seed in 0..=i64::MAX as u64,
            replicas in 1usize..1000,
            dt in 1e-6f64..1.0,
            t_final in 1.0f64..1e4,
            window in 0.01f64..1.0,
            ics in prop::collection::vec((prop::collection::vec(finite(), 1..4), prop::option::of(0usize..3)), 0..3),
            scan in prop::option::of(prop::collection::vec(finite(), 1..4)),
            model in model_strategy(),
        ) {
            let cfg = ExperimentConfig {
                seed,
                replicas,
                experiment: Experiment::Slope,
                output: PathBuf::from("out/run"),
                ics: ics.into_iter().map(|(x, regime)| InitialCondition { x, regime }).collect(),
                options: ExperimentOptions {
                    window,
                    scan: scan.map(|values| ScanConfig { parameter: "alpha0".into(), values }),
                    ..ExperimentOptions::default()
                },
                sim: SimConfig::new(dt, t_final),
                model,
            };
            let text = cfg.to_toml();
            let back: ExperimentConfig = toml::from_str(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
