//! Membership score functions.
//!
//! Every attack maps a trained model and a queried sample to a real score,
//! higher meaning "more likely a training member". Constant offsets (the
//! global tau of the loss attack, prior log-odds, normalization terms) are
//! deliberately left out: decisions are made by selecting a threshold on
//! the raw scores, which absorbs any constant. Scores are therefore only
//! comparable within a single attack.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::models::{
    gaussian_loss, predict_label, sample_grad, sample_loss, HessianFactor, ModelKind,
    ModelParams,
};
use crate::numeric::{dot, prior_log_odds, sigmoid};

/// The implemented attacks, in roughly increasing order of access: label
/// agreement only, loss, calibrated loss, closed-form optimal, and the two
/// parameter-difference (white-box) variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    ZeroOne,
    Malt,
    Mast,
    GaussianOptimal,
    Matt,
    MattFull,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::ZeroOne,
        AttackKind::Malt,
        AttackKind::Mast,
        AttackKind::GaussianOptimal,
        AttackKind::Matt,
        AttackKind::MattFull,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::ZeroOne => "zero_one",
            AttackKind::Malt => "malt",
            AttackKind::Mast => "mast",
            AttackKind::GaussianOptimal => "gaussian_optimal",
            AttackKind::Matt => "matt",
            AttackKind::MattFull => "matt_full",
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown attack {s:?}")))
    }
}

/// One scored sample: its index in the evaluated dataset, the attack
/// score, and the true membership bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub index: usize,
    pub score: f64,
    pub truth: bool,
}

impl ScoreRecord {
    pub fn new(index: usize, score: f64, truth: bool) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite score {score} for sample {index}"
            )));
        }
        Ok(ScoreRecord {
            index,
            score,
            truth,
        })
    }
}

/// Calibration thresholds: either one global value or one per sample of
/// the evaluated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauEstimate {
    Global(f64),
    PerSample(Vec<f64>),
}

impl TauEstimate {
    pub fn global(tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::Calibration(format!(
                "global threshold must be finite, got {tau}"
            )));
        }
        Ok(TauEstimate::Global(tau))
    }

    pub fn per_sample(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::Calibration(
                "per-sample thresholds must be nonempty".into(),
            ));
        }
        if let Some(bad) = taus.iter().position(|t| !t.is_finite()) {
            return Err(Error::Calibration(format!(
                "threshold for sample {bad} is not finite"
            )));
        }
        Ok(TauEstimate::PerSample(taus))
    }

    /// The threshold to use for the sample at `index`.
    pub fn for_index(&self, index: usize) -> Result<f64> {
        match self {
            TauEstimate::Global(tau) => Ok(*tau),
            TauEstimate::PerSample(taus) => taus.get(index).copied().ok_or_else(|| {
                Error::Calibration(format!(
                    "no threshold for sample {index}: calibration covers {} samples",
                    taus.len()
                ))
            }),
        }
    }
}

/// Label-agreement score: 1 when the model predicts the sample's label,
/// else 0. Only meaningful for classifiers.
pub fn zero_one_score(theta: &ModelParams, z: &Sample) -> Result<f64> {
    match theta.kind {
        ModelKind::LogisticRegression => Ok((predict_label(theta, z)? == z.label) as u8 as f64),
        ModelKind::GaussianMean => Err(Error::Model(
            "the 0-1 attack needs a classifier; the mean estimator predicts no labels".into(),
        )),
    }
}

/// Loss attack: the negated loss. The global calibration constant is
/// omitted because threshold selection absorbs it; for classifiers this
/// equals the log-probability of the correct label.
pub fn malt_score(theta: &ModelParams, z: &Sample) -> Result<f64> {
    Ok(-sample_loss(theta, z)?)
}

/// Per-sample-calibrated loss attack: `tau(z) - loss(theta, z)`, where
/// the threshold reflects how hard the sample is for models that never
/// saw it. `index` addresses the sample in the calibrated dataset.
pub fn mast_score(
    theta: &ModelParams,
    z: &Sample,
    index: usize,
    tau: &TauEstimate,
) -> Result<f64> {
    Ok(tau.for_index(index)? - sample_loss(theta, z)?)
}

/// The calibration term of the Gaussian model in closed form:
/// `n'/(2(n'+1)) * ||z - mu||^2`. An additive constant independent of z
/// is dropped (absorbed by thresholding).
pub fn gaussian_tau_closed_form(z: &Sample, mu: &[f64], n_prime: usize) -> Result<f64> {
    if z.dim() != mu.len() {
        return Err(Error::Model(format!(
            "sample dimension {} does not match mean dimension {}",
            z.dim(),
            mu.len()
        )));
    }
    if n_prime < 1 {
        return Err(Error::Model("need at least one training member".into()));
    }
    let n = n_prime as f64;
    let dist_sq: f64 = z
        .features
        .iter()
        .zip(mu)
        .map(|(x, m)| (x - m) * (x - m))
        .sum();
    Ok(n / (2.0 * (n + 1.0)) * dist_sq)
}

/// Expectation of [`gaussian_tau_closed_form`] over `z ~ N(mu, I)` in
/// dimension d: the constant threshold `n' d / (2(n'+1))`.
pub fn gaussian_tau_expected(d: usize, n_prime: usize) -> f64 {
    let n = n_prime as f64;
    // same evaluation order as the closed form, so substituting a z with
    // ||z - mu||^2 = d reproduces this value bit for bit
    n / (2.0 * (n + 1.0)) * d as f64
}

/// Exact optimal score for the Gaussian model at unit temperature:
/// closed-form calibration minus the loss. Monotone in the membership
/// posterior, so thresholding it is the optimal decision rule.
pub fn gaussian_optimal_score(
    theta: &ModelParams,
    z: &Sample,
    mu: &[f64],
    n_prime: usize,
) -> Result<f64> {
    if theta.temperature != 1.0 {
        return Err(Error::Config(format!(
            "the closed-form optimal score requires temperature 1, got {}",
            theta.temperature
        )));
    }
    Ok(gaussian_tau_closed_form(z, mu, n_prime)? - gaussian_loss(theta, z)?)
}

/// Parameter-difference attack: `-(theta - theta0) . grad loss(theta0, z)`.
///
/// `theta0` must be a reference model trained on data disjoint from the
/// membership question being asked, so that the difference isolates the
/// queried model's update. Positive scores mean the model moved in the
/// direction that reduces this sample's loss.
pub fn matt_score(theta: &ModelParams, theta0: &ModelParams, z: &Sample) -> Result<f64> {
    check_pair(theta, theta0)?;
    let grad = sample_grad(theta0, z)?;
    let mut acc = 0.0;
    for ((t, t0), g) in theta.theta.iter().zip(&theta0.theta).zip(&grad) {
        acc -= (t - t0) * g;
    }
    Ok(acc)
}

/// Two-term parameter-difference attack: adds the curvature correction
/// `-1/2 g' H^-1 g` to [`matt_score`], where H is the (positive definite)
/// Hessian of the reference model's training objective at `theta0`.
pub fn matt_full_score(
    theta: &ModelParams,
    theta0: &ModelParams,
    z: &Sample,
    hessian: &HessianFactor,
) -> Result<f64> {
    check_pair(theta, theta0)?;
    if hessian.dim() != theta0.dim() {
        return Err(Error::Model(format!(
            "Hessian dimension {} does not match parameter dimension {}",
            hessian.dim(),
            theta0.dim()
        )));
    }
    let first = matt_score(theta, theta0, z)?;
    let grad = sample_grad(theta0, z)?;
    let correction = -0.5 * dot(&grad, &hessian.solve(&grad));
    Ok(first + correction)
}

/// Membership posterior from a raw score: `sigmoid(score + log-odds of
/// lambda)`. Valid when `score` carries the full `(tau - loss)/T` form
/// with no constants dropped; with dropped constants it is a monotone
/// surrogate, not a probability.
pub fn membership_posterior(score: f64, lambda: f64) -> f64 {
    sigmoid(score + prior_log_odds(lambda))
}

fn check_pair(theta: &ModelParams, theta0: &ModelParams) -> Result<()> {
    if theta.kind != theta0.kind {
        return Err(Error::Model(format!(
            "mismatched model kinds {} and {}",
            theta.kind, theta0.kind
        )));
    }
    if theta.dim() != theta0.dim() {
        return Err(Error::Model(format!(
            "mismatched parameter dimensions {} and {}",
            theta.dim(),
            theta0.dim()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Score file format: CSV with columns index, attack, score, truth
// ---------------------------------------------------------------------------

/// Write one attack's scores as a text table with columns
/// `index,attack,score,truth`. Scores carry 17 significant digits, so the
/// file is an exact record.
pub fn write_scores_csv(path: &Path, attack: AttackKind, records: &[ScoreRecord]) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer
        .write_record(["index", "attack", "score", "truth"])
        .map_err(|e| Error::format(&display, e.to_string()))?;
    for r in records {
        writer
            .write_record([
                r.index.to_string(),
                attack.name().to_string(),
                crate::data::format_float(r.score),
                (r.truth as u8).to_string(),
            ])
            .map_err(|e| Error::format(&display, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Read a score table written by [`write_scores_csv`], returning the
/// attack it belongs to and the records.
pub fn read_scores_csv(path: &Path) -> Result<(AttackKind, Vec<ScoreRecord>)> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader
        .headers()
        .map_err(|e| Error::format(&display, e.to_string()))?;
    if header != vec!["index", "attack", "score", "truth"] {
        return Err(Error::format(
            &display,
            "expected header index,attack,score,truth",
        ));
    }
    let mut attack: Option<AttackKind> = None;
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(&display, e.to_string()))?;
        if row.len() != 4 {
            return Err(Error::format(&display, format!("row {i} has {} fields", row.len())));
        }
        let index: usize = row[0]
            .parse()
            .map_err(|e| Error::format(&display, format!("row {i} index: {e}")))?;
        let kind: AttackKind = row[1].parse()?;
        match attack {
            None => attack = Some(kind),
            Some(k) if k == kind => {}
            Some(k) => {
                return Err(Error::format(
                    &display,
                    format!("mixed attacks {k} and {kind} in one file"),
                ));
            }
        }
        let score: f64 = row[2]
            .parse()
            .map_err(|e| Error::format(&display, format!("row {i} score: {e}")))?;
        let truth = match &row[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::format(
                    &display,
                    format!("row {i} truth must be 0 or 1, got {other:?}"),
                ));
            }
        };
        records.push(ScoreRecord::new(index, score, truth)?);
    }
    let attack = attack.ok_or_else(|| Error::format(&display, "score table is empty"))?;
    Ok((attack, records))
}
