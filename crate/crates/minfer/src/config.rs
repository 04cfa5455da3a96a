//! Experiment configuration: one JSON document describing data, model,
//! splits, shadows, attacks, and evaluation.
//!
//! Validation happens eagerly and catches both malformed values and
//! unsatisfiable attack prerequisites (a per-sample-threshold attack
//! with no shadow ensemble, a parameter-difference attack with no
//! reserved calibration data), so failures surface before any stage
//! runs.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackKind;
use crate::data::SplitMode;
use crate::error::{Error, Result};
use crate::models::ModelKind;

/// Synthetic data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Standard-normal features around `mu` (defaults to the origin),
    /// all one label.
    Gaussian {
        n: usize,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
    },
    /// Two alternating classes with centers `separation` apart on the
    /// first axis.
    TwoClass { n: usize, d: usize, separation: f64 },
}

impl DataConfig {
    pub fn n(&self) -> usize {
        match *self {
            DataConfig::Gaussian { n, .. } | DataConfig::TwoClass { n, .. } => n,
        }
    }

    pub fn d(&self) -> usize {
        match *self {
            DataConfig::Gaussian { d, .. } | DataConfig::TwoClass { d, .. } => d,
        }
    }

    /// The population center, defaulting to the origin for Gaussian data.
    pub fn center(&self) -> Vec<f64> {
        match self {
            DataConfig::Gaussian { d, mu, .. } => {
                mu.clone().unwrap_or_else(|| vec![0.0; *d])
            }
            DataConfig::TwoClass { d, .. } => vec![0.0; *d],
        }
    }
}

fn default_l2() -> f64 {
    1e-2
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    100
}

/// Target (and shadow) model family and trainer settings. The ridge and
/// tolerance fields only apply to logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_lambda() -> f64 {
    0.5
}

fn default_calibration_fraction() -> f64 {
    0.5
}

fn default_split_mode() -> SplitMode {
    SplitMode::Bernoulli
}

/// How the pool divides into reserved calibration data and the evaluated
/// world, and how the evaluated world splits into members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Prior membership probability of an evaluated sample.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Fraction of the pool reserved for training the reference model;
    /// zero disables the reserve (and the attacks that need it).
    #[serde(default = "default_calibration_fraction")]
    pub calibration_fraction: f64,
    #[serde(default = "default_split_mode")]
    pub mode: SplitMode,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            lambda: default_lambda(),
            calibration_fraction: default_calibration_fraction(),
            mode: default_split_mode(),
        }
    }
}

fn default_k() -> usize {
    30
}

fn default_member_fraction() -> f64 {
    0.5
}

/// Shadow ensemble size and per-shadow membership rate. `k = 0` disables
/// shadow training entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_member_fraction")]
    pub member_fraction: f64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        ShadowConfig {
            k: default_k(),
            member_fraction: default_member_fraction(),
        }
    }
}

fn default_cv_folds() -> Option<usize> {
    Some(5)
}

/// Evaluation settings: `cv_folds: null` drops the cross-validated
/// accuracy column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_cv_folds")]
    pub cv_folds: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cv_folds: default_cv_folds(),
        }
    }
}

/// The whole experiment in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub shadows: ShadowConfig,
    pub attacks: Vec<AttackKind>,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    /// Check value ranges, model/data compatibility, and that every
    /// requested attack's prerequisites are satisfiable.
    pub fn validate(&self) -> Result<()> {
        let n = self.data.n();
        let d = self.data.d();
        if n < 4 {
            return Err(Error::Config(format!(
                "need at least 4 samples to split into calibration and evaluation data, got n = {n}"
            )));
        }
        if d < 1 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        match &self.data {
            DataConfig::Gaussian { mu: Some(mu), .. } => {
                if mu.len() != d {
                    return Err(Error::Config(format!(
                        "mu has {} entries but d = {d}",
                        mu.len()
                    )));
                }
                if mu.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("mu entries must be finite".into()));
                }
            }
            DataConfig::Gaussian { .. } => {}
            DataConfig::TwoClass { n, separation, .. } => {
                if n % 2 != 0 {
                    return Err(Error::Config(format!(
                        "two-class data needs an even n for balanced labels, got {n}"
                    )));
                }
                if !separation.is_finite() {
                    return Err(Error::Config("separation must be finite".into()));
                }
            }
        }

        let expected_kind = match self.data {
            DataConfig::Gaussian { .. } => ModelKind::GaussianMean,
            DataConfig::TwoClass { .. } => ModelKind::LogisticRegression,
        };
        if self.model.kind != expected_kind {
            return Err(Error::Config(format!(
                "{} data trains a {expected_kind} model, not {}",
                match self.data {
                    DataConfig::Gaussian { .. } => "gaussian",
                    DataConfig::TwoClass { .. } => "two-class",
                },
                self.model.kind
            )));
        }
        if self.model.kind == ModelKind::LogisticRegression {
            if !(self.model.l2 > 0.0) || !self.model.l2.is_finite() {
                return Err(Error::Config(format!(
                    "logistic regression needs a positive finite ridge, got l2 = {}",
                    self.model.l2
                )));
            }
            if !(self.model.tol > 0.0) {
                return Err(Error::Config(format!(
                    "tolerance must be positive, got {}",
                    self.model.tol
                )));
            }
            if self.model.max_iter < 1 {
                return Err(Error::Config("max_iter must be at least 1".into()));
            }
        }

        if !(self.split.lambda > 0.0 && self.split.lambda < 1.0) {
            return Err(Error::Config(format!(
                "lambda must lie strictly in (0, 1), got {}",
                self.split.lambda
            )));
        }
        if !(0.0..1.0).contains(&self.split.calibration_fraction) {
            return Err(Error::Config(format!(
                "calibration_fraction must lie in [0, 1), got {}",
                self.split.calibration_fraction
            )));
        }
        if self.shadows.k > 0
            && !(self.shadows.member_fraction > 0.0 && self.shadows.member_fraction < 1.0)
        {
            return Err(Error::Config(format!(
                "shadow member_fraction must lie strictly in (0, 1), got {}",
                self.shadows.member_fraction
            )));
        }
        if let Some(folds) = self.eval.cv_folds {
            if folds < 2 {
                return Err(Error::Config(format!(
                    "cross-validation needs at least 2 folds, got {folds}"
                )));
            }
        }

        if self.attacks.is_empty() {
            return Err(Error::Config("no attacks requested".into()));
        }
        for (i, attack) in self.attacks.iter().enumerate() {
            if self.attacks[..i].contains(attack) {
                return Err(Error::Config(format!("attack {attack} listed twice")));
            }
            match attack {
                AttackKind::Mast if self.shadows.k == 0 => {
                    return Err(Error::Config(
                        "mast needs per-sample thresholds from a shadow ensemble, \
                         but shadows.k = 0; set shadows.k >= 1"
                            .into(),
                    ));
                }
                AttackKind::Matt | AttackKind::MattFull
                    if self.split.calibration_fraction == 0.0 =>
                {
                    return Err(Error::Config(format!(
                        "{attack} needs a reference model trained on reserved data, \
                         but calibration_fraction = 0"
                    )));
                }
                AttackKind::ZeroOne if self.model.kind != ModelKind::LogisticRegression => {
                    return Err(Error::Config(
                        "zero_one compares predicted labels and needs a classifier".into(),
                    ));
                }
                AttackKind::GaussianOptimal if self.model.kind != ModelKind::GaussianMean => {
                    return Err(Error::Config(
                        "gaussian_optimal is the closed form for the Gaussian mean model".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let config: ExperimentConfig = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Config(format!("{display}: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Write a config (used for the manifest's snapshot and for examples).
pub fn save_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), config)
        .map_err(|e| Error::format(&display, e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn gaussian_config() -> ExperimentConfig {
        ExperimentConfig {
            seed: 7,
            data: DataConfig::Gaussian {
                n: 200,
                d: 50,
                mu: None,
            },
            model: ModelConfig {
                kind: ModelKind::GaussianMean,
                l2: default_l2(),
                tol: default_tol(),
                max_iter: default_max_iter(),
            },
            split: SplitConfig::default(),
            shadows: ShadowConfig::default(),
            attacks: vec![AttackKind::Malt, AttackKind::GaussianOptimal],
            eval: EvalConfig::default(),
        }
    }

    #[test]
    fn valid_config_round_trips() {
        let config = gaussian_config();
        config.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        save_config(&config, &path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let text = r#"{
            "seed": 1,
            "data": {"kind": "gaussian", "n": 100, "d": 10},
            "model": {"kind": "gaussian_mean"},
            "attacks": ["malt"]
        }"#;
        let config: ExperimentConfig = serde_json::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.split.lambda, 0.5);
        assert_eq!(config.split.calibration_fraction, 0.5);
        assert_eq!(config.shadows.k, 30);
        assert_eq!(config.eval.cv_folds, Some(5));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{
            "seed": 1,
            "data": {"kind": "gaussian", "n": 100, "d": 10},
            "model": {"kind": "gaussian_mean"},
            "attacks": ["malt"],
            "surprise": true
        }"#;
        let err = serde_json::from_str::<ExperimentConfig>(text).unwrap_err();
        assert!(err.to_string().contains("surprise"));
    }

    #[test]
    fn mast_without_shadows_is_rejected() {
        let mut config = gaussian_config();
        config.attacks = vec![AttackKind::Mast];
        config.shadows.k = 0;
        let err = config.validate().unwrap_err();
        assert_eq!(err.stage(), "config");
        assert!(err.to_string().contains("shadow ensemble"), "{err}");
    }

    #[test]
    fn matt_without_reserve_is_rejected() {
        let mut config = gaussian_config();
        config.attacks = vec![AttackKind::Matt];
        config.split.calibration_fraction = 0.0;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("reference model"), "{err}");
    }

    #[test]
    fn model_data_mismatch_is_rejected() {
        let mut config = gaussian_config();
        config.model.kind = ModelKind::LogisticRegression;
        assert_eq!(config.validate().unwrap_err().stage(), "config");
    }

    #[test]
    fn range_violations_are_rejected() {
        let mut config = gaussian_config();
        config.split.lambda = 1.0;
        assert!(config.validate().is_err());

        let mut config = gaussian_config();
        config.data = DataConfig::TwoClass {
            n: 201,
            d: 4,
            separation: 1.0,
        };
        config.model.kind = ModelKind::LogisticRegression;
        config.attacks = vec![AttackKind::Malt];
        assert!(config.validate().is_err()); // odd n

        let mut config = gaussian_config();
        config.attacks = vec![AttackKind::Malt, AttackKind::Malt];
        assert!(config.validate().is_err());

        let mut config = gaussian_config();
        config.attacks = vec![AttackKind::ZeroOne];
        assert!(config.validate().is_err());

        let mut config = gaussian_config();
        config.eval.cv_folds = Some(1);
        assert!(config.validate().is_err());
    }
}
