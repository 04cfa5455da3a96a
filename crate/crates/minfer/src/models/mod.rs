//! The two tractable model families: a Gaussian mean estimator and binary
//! L2-regularized logistic regression.
//!
//! Both expose per-sample losses with exact analytic gradients (and, for
//! logistic regression, Hessians), deterministic trainers, and a
//! closed-form posterior sampler for the Gaussian family. Parameters are a
//! flat vector tagged with the model kind and a temperature.

mod gaussian;
mod hessian;
mod logistic;

pub use gaussian::{
    gaussian_loss, gaussian_posterior_sampler, train_gaussian_mean, PosteriorDraws,
};
pub use hessian::{HessianFactor, SymMatrix};
pub use logistic::{
    logreg_loss, predict_label, total_hessian, train_logreg, train_logreg_with, TrainConfig,
};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};

/// The supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GaussianMean,
    LogisticRegression,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::GaussianMean => write!(f, "gaussian_mean"),
            ModelKind::LogisticRegression => write!(f, "logistic_regression"),
        }
    }
}

/// A flat parameter vector with its model kind and temperature.
///
/// The temperature scales the posterior `exp(-L/T)` over parameters; the
/// deterministic trainers ignore it (loss-threshold decisions are invariant
/// to it) but it is carried for the posterior sampler and the privacy
/// bounds. `l2` records the total ridge strength a logistic model was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub theta: Vec<f64>,
    pub temperature: f64,
    pub l2: Option<f64>,
}

impl ModelParams {
    pub fn new(kind: ModelKind, theta: Vec<f64>, temperature: f64) -> Result<Self> {
        let params = ModelParams {
            kind,
            theta,
            temperature,
            l2: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = Some(l2);
        self
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::Model("parameter vector must be nonempty".into()));
        }
        if !self.theta.iter().all(|x| x.is_finite()) {
            return Err(Error::Model("parameter vector has non-finite entries".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Model(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    fn check_dim(&self, z: &Sample) -> Result<()> {
        if z.dim() != self.dim() {
            return Err(Error::Model(format!(
                "sample dimension {} does not match parameter dimension {}",
                z.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Per-sample loss value with optional exact derivatives.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub loss: f64,
    pub gradient: Option<Vec<f64>>,
    pub hessian: Option<SymMatrix>,
}

/// The data-term loss l(theta, z) of the sample under the model.
///
/// For the Gaussian family this is the squared-distance loss; for logistic
/// regression the cross-entropy of the correct label. Ridge terms are a
/// prior over parameters, not part of the per-sample data term, so they are
/// excluded here; attack scores built on this loss shift by a constant if a
/// ridge share is added, which threshold selection absorbs.
pub fn sample_loss(params: &ModelParams, z: &Sample) -> Result<f64> {
    match params.kind {
        ModelKind::GaussianMean => gaussian::gaussian_loss(params, z),
        ModelKind::LogisticRegression => logistic::data_loss(params, z),
    }
}

/// Gradient in theta of the data-term loss at (params, z).
pub fn sample_grad(params: &ModelParams, z: &Sample) -> Result<Vec<f64>> {
    match params.kind {
        ModelKind::GaussianMean => gaussian::gaussian_grad(params, z),
        ModelKind::LogisticRegression => logistic::data_grad(params, z),
    }
}

// ---------------------------------------------------------------------------
// Parameter serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    kind: ModelKind,
    d: usize,
    temperature: f64,
    l2: Option<f64>,
    theta: Vec<f64>,
}

/// Save parameters as a JSON document (kind, d, T, l2, theta). Floats are
/// written in shortest round-trip form, so loading is lossless.
pub fn save_params(params: &ModelParams, path: &Path) -> Result<()> {
    let file = ParamsFile {
        kind: params.kind,
        d: params.dim(),
        temperature: params.temperature,
        l2: params.l2,
        theta: params.theta.clone(),
    };
    let out = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::to_writer_pretty(BufWriter::new(out), &file)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    Ok(())
}

/// Load parameters saved by [`save_params`].
pub fn load_params(path: &Path) -> Result<ModelParams> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let parsed: ParamsFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format(&display, e.to_string()))?;
    if parsed.theta.len() != parsed.d {
        return Err(Error::format(
            &display,
            format!(
                "declared d = {} but theta has {} entries",
                parsed.d,
                parsed.theta.len()
            ),
        ));
    }
    let mut params = ModelParams::new(parsed.kind, parsed.theta, parsed.temperature)?;
    params.l2 = parsed.l2;
    Ok(params)
}
