//! Binary L2-regularized logistic regression: cross-entropy loss with
//! exact gradient and Hessian, and a deterministic Newton trainer.
//!
//! The parameter vector has one weight per feature and no intercept; the
//! synthetic two-class generator is symmetric about the origin, so an
//! intercept adds nothing. Only two classes are supported.

use super::{HessianFactor, LossReport, ModelKind, ModelParams, SymMatrix};
use crate::data::{Dataset, Sample, SplitSpec};
use crate::error::{Error, Result};
use crate::numeric::{dot, norm, norm_sq, sigmoid, softplus};

/// Cross-entropy of the correct label plus an allocated ridge share, with
/// exact gradient and Hessian.
///
/// `l2` is the ridge coefficient applied in this single evaluation: when a
/// model is trained with total ridge strength `L`, pass `L / n'` so that
/// the per-sample losses of the n' training samples sum to the trained
/// objective. Pass 0 for the bare cross-entropy.
pub fn logreg_loss(params: &ModelParams, z: &Sample, l2: f64) -> Result<LossReport> {
    check_logistic(params, z)?;
    if !(l2 >= 0.0) {
        return Err(Error::Model(format!("l2 must be >= 0, got {l2}")));
    }
    let t = dot(&params.theta, &z.features);
    let (margin, sign) = signed_margin(t, z.label);
    let loss = softplus(margin) + 0.5 * l2 * norm_sq(&params.theta);
    let c = sign * sigmoid(margin); // the residual p - y
    let gradient: Vec<f64> = params
        .theta
        .iter()
        .zip(&z.features)
        .map(|(th, x)| c * x + l2 * th)
        .collect();
    let w = sigmoid(t) * sigmoid(-t);
    let mut hessian = SymMatrix::zeros(params.dim());
    hessian.add_scaled_outer(&z.features, w);
    hessian.add_diagonal(l2);
    Ok(LossReport {
        loss,
        gradient: Some(gradient),
        hessian: Some(hessian),
    })
}

/// Bare cross-entropy, the data term of [`logreg_loss`].
pub(super) fn data_loss(params: &ModelParams, z: &Sample) -> Result<f64> {
    check_logistic(params, z)?;
    let t = dot(&params.theta, &z.features);
    let (margin, _) = signed_margin(t, z.label);
    Ok(softplus(margin))
}

/// Gradient of the bare cross-entropy: `(p - y) x`.
pub(super) fn data_grad(params: &ModelParams, z: &Sample) -> Result<Vec<f64>> {
    check_logistic(params, z)?;
    let t = dot(&params.theta, &z.features);
    let (margin, sign) = signed_margin(t, z.label);
    let c = sign * sigmoid(margin);
    Ok(z.features.iter().map(|&x| c * x).collect())
}

/// The predicted class: 1 when the logit is nonnegative.
pub fn predict_label(params: &ModelParams, z: &Sample) -> Result<usize> {
    check_logistic(params, z)?;
    Ok((dot(&params.theta, &z.features) >= 0.0) as usize)
}

/// Loss written as softplus of a signed margin: `margin` is `t` for label
/// 0 and `-t` for label 1, and `sign` is the matching +-1 so that
/// `sign * sigmoid(margin)` equals the residual `p - y`. Both forms stay
/// accurate for margins of either sign and any magnitude.
fn signed_margin(t: f64, label: usize) -> (f64, f64) {
    if label == 0 {
        (t, 1.0)
    } else {
        (-t, -1.0)
    }
}

fn check_logistic(params: &ModelParams, z: &Sample) -> Result<()> {
    if params.kind != ModelKind::LogisticRegression {
        return Err(Error::Model(format!(
            "expected a logistic_regression model, got {}",
            params.kind
        )));
    }
    params.check_dim(z)?;
    if z.label > 1 {
        return Err(Error::Model(format!(
            "logistic regression supports labels 0 and 1, got {}",
            z.label
        )));
    }
    if !z.features.iter().all(|x| x.is_finite()) {
        return Err(Error::Model("sample has non-finite features".into()));
    }
    Ok(())
}

/// Trainer knobs beyond the required (l2, tol) pair.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Total ridge strength; must be positive so the minimizer is unique.
    pub l2: f64,
    /// Stop when the gradient norm of the member objective drops below this.
    pub tol: f64,
    /// Iteration cap before reporting non-convergence.
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1e-2,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Minimize the member cross-entropy plus `(l2/2)||theta||^2` by Newton's
/// method with backtracking, starting from zero.
///
/// The iteration is full-batch and has no randomness, so retraining on
/// identical inputs returns bit-identical parameters.
pub fn train_logreg(data: &Dataset, split: &SplitSpec, l2: f64, tol: f64) -> Result<ModelParams> {
    train_logreg_with(
        data,
        split,
        &TrainConfig {
            l2,
            tol,
            ..TrainConfig::default()
        },
    )
}

/// [`train_logreg`] with an explicit iteration cap.
pub fn train_logreg_with(
    data: &Dataset,
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<ModelParams> {
    if data.num_classes() != 2 {
        return Err(Error::Model(format!(
            "logistic regression needs exactly 2 classes, dataset has {}",
            data.num_classes()
        )));
    }
    if split.len() != data.len() {
        return Err(Error::Training(format!(
            "split covers {} samples but the dataset has {}",
            split.len(),
            data.len()
        )));
    }
    if !(cfg.l2 > 0.0) {
        return Err(Error::Training(format!(
            "l2 must be > 0 for a unique minimizer, got {}",
            cfg.l2
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Training(format!(
            "tolerance must be > 0, got {}",
            cfg.tol
        )));
    }
    let members = split.member_indices();
    for class in 0..2 {
        if !members.iter().any(|&i| data.sample(i).label == class) {
            return Err(Error::Training(format!(
                "training set has no member of class {class}"
            )));
        }
    }

    let d = data.dim();
    let mut theta = vec![0.0; d];
    let mut grad_norm = f64::INFINITY;
    for iteration in 0..=cfg.max_iter {
        let (value, grad, hess) = member_objective_full(&theta, data, &members, cfg.l2);
        grad_norm = norm(&grad);
        if grad_norm <= cfg.tol {
            return Ok(ModelParams::new(ModelKind::LogisticRegression, theta, 1.0)?
                .with_l2(cfg.l2));
        }
        if iteration == cfg.max_iter {
            break;
        }
        let factor = HessianFactor::new(&hess)?;
        let step: Vec<f64> = factor.solve(&grad).iter().map(|x| -x).collect();
        let slope = dot(&grad, &step); // negative for a descent direction
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&step)
                .map(|(th, p)| th + alpha * p)
                .collect();
            if member_objective(&trial, data, &members, cfg.l2)
                <= value + 1e-4 * alpha * slope
            {
                theta = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // the line search stagnated at floating-point resolution
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        grad_norm,
        tol: cfg.tol,
    })
}

/// Hessian of the member objective `sum CE + (l2/2)||theta||^2` at theta.
///
/// This is the H of the influence approximation: factor it once with
/// [`HessianFactor`] and reuse the solve across queried samples.
pub fn total_hessian(
    theta: &ModelParams,
    data: &Dataset,
    split: &SplitSpec,
    l2: f64,
) -> Result<SymMatrix> {
    if theta.kind != ModelKind::LogisticRegression {
        return Err(Error::Model(format!(
            "expected a logistic_regression model, got {}",
            theta.kind
        )));
    }
    if split.len() != data.len() {
        return Err(Error::Model(format!(
            "split covers {} samples but the dataset has {}",
            split.len(),
            data.len()
        )));
    }
    if !(l2 >= 0.0) {
        return Err(Error::Model(format!("l2 must be >= 0, got {l2}")));
    }
    let mut hess = SymMatrix::zeros(theta.dim());
    for i in split.member_indices() {
        let z = data.sample(i);
        let t = dot(&theta.theta, &z.features);
        let w = sigmoid(t) * sigmoid(-t);
        hess.add_scaled_outer(&z.features, w);
    }
    hess.add_diagonal(l2);
    Ok(hess)
}

fn member_objective(theta: &[f64], data: &Dataset, members: &[usize], l2: f64) -> f64 {
    let mut value = 0.5 * l2 * norm_sq(theta);
    for &i in members {
        let z = data.sample(i);
        let t = dot(theta, &z.features);
        let (margin, _) = signed_margin(t, z.label);
        value += softplus(margin);
    }
    value
}

fn member_objective_full(
    theta: &[f64],
    data: &Dataset,
    members: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, SymMatrix) {
    let d = theta.len();
    let mut value = 0.5 * l2 * norm_sq(theta);
    let mut grad: Vec<f64> = theta.iter().map(|&th| l2 * th).collect();
    let mut hess = SymMatrix::zeros(d);
    hess.add_diagonal(l2);
    for &i in members {
        let z = data.sample(i);
        let t = dot(theta, &z.features);
        let (margin, sign) = signed_margin(t, z.label);
        value += softplus(margin);
        let c = sign * sigmoid(margin);
        for (g, x) in grad.iter_mut().zip(&z.features) {
            *g += c * x;
        }
        hess.add_scaled_outer(&z.features, sigmoid(t) * sigmoid(-t));
    }
    (value, grad, hess)
}
