//! Gaussian mean estimation: squared-distance loss, exact training by
//! averaging, and the closed-form posterior over the estimated mean.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ModelKind, ModelParams};
use crate::data::{Dataset, Sample, SplitSpec};
use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Squared-distance loss `l(theta, z) = ||z - theta||^2 / 2`.
pub fn gaussian_loss(params: &ModelParams, z: &Sample) -> Result<f64> {
    check_gaussian(params, z)?;
    let mut acc = 0.0;
    for (t, x) in params.theta.iter().zip(&z.features) {
        let diff = x - t;
        acc += diff * diff;
    }
    Ok(0.5 * acc)
}

/// Gradient in theta of the squared-distance loss: `theta - z`.
pub(super) fn gaussian_grad(params: &ModelParams, z: &Sample) -> Result<Vec<f64>> {
    check_gaussian(params, z)?;
    Ok(params
        .theta
        .iter()
        .zip(&z.features)
        .map(|(t, x)| t - x)
        .collect())
}

fn check_gaussian(params: &ModelParams, z: &Sample) -> Result<()> {
    if params.kind != ModelKind::GaussianMean {
        return Err(Error::Model(format!(
            "expected a gaussian_mean model, got {}",
            params.kind
        )));
    }
    params.check_dim(z)
}

/// Fit the mean model: theta is the exact average of the member samples.
pub fn train_gaussian_mean(data: &Dataset, split: &SplitSpec) -> Result<ModelParams> {
    if split.len() != data.len() {
        return Err(Error::Training(format!(
            "split covers {} samples but the dataset has {}",
            split.len(),
            data.len()
        )));
    }
    let members = split.member_indices();
    if members.is_empty() {
        return Err(Error::Training(
            "cannot train on an empty member set (n' = 0)".into(),
        ));
    }
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for &i in &members {
        for (m, x) in mean.iter_mut().zip(&data.sample(i).features) {
            *m += x;
        }
    }
    let inv = 1.0 / members.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    ModelParams::new(ModelKind::GaussianMean, mean, 1.0)
}

/// Infinite stream of i.i.d. draws from the posterior over the mean,
/// `N(member mean, I / n')`. Created by [`gaussian_posterior_sampler`].
pub struct PosteriorDraws {
    mean: Vec<f64>,
    std: f64,
    rng: ChaCha8Rng,
}

impl PosteriorDraws {
    /// The posterior mean (the trained parameter vector).
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// The per-coordinate standard deviation, `1 / sqrt(n')`.
    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn draw(&mut self) -> Vec<f64> {
        self.mean
            .iter()
            .map(|&m| m + self.std * self.rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

impl Iterator for PosteriorDraws {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.draw())
    }
}

/// Sample from the exact posterior over the mean given the member set.
///
/// With unit temperature the posterior of theta under the member losses
/// `||z_i - theta||^2 / 2` and a flat prior is Gaussian with mean equal to
/// the member average and covariance `I / n'`. Only `temperature == 1.0`
/// is supported; other temperatures rescale the covariance and are not
/// implemented.
pub fn gaussian_posterior_sampler(
    data: &Dataset,
    split: &SplitSpec,
    temperature: f64,
    seed: RngSeed,
) -> Result<PosteriorDraws> {
    if temperature != 1.0 {
        return Err(Error::Config(format!(
            "posterior sampling is implemented only at temperature 1, got {temperature}"
        )));
    }
    let params = train_gaussian_mean(data, split)?;
    let n_prime = split.member_count() as f64;
    Ok(PosteriorDraws {
        mean: params.theta,
        std: 1.0 / n_prime.sqrt(),
        rng: seed.rng(),
    })
}
