//! Small numerically-careful primitives shared across modules.

use crate::error::{Error, Result};

/// Logistic sigmoid, stable on both tails.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow for large |t|.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Prior log-odds log(lambda / (1 - lambda)).
pub fn prior_log_odds(lambda: f64) -> f64 {
    (lambda / (1.0 - lambda)).ln()
}

/// log of the mean of e^{x_i}, shifted by the max exponent for stability.
///
/// Errors if the slice is empty or every exponent is -inf (the mean would
/// be log of zero).
pub fn log_mean_exp(exponents: &[f64]) -> Result<f64> {
    if exponents.is_empty() {
        return Err(Error::Numerical("log_mean_exp of empty slice".into()));
    }
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numerical(
            "log_mean_exp: all exponents are -inf".into(),
        ));
    }
    let sum: f64 = exponents.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + (sum / exponents.len() as f64).ln())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// Ordinary least squares fit y = a + b x; returns (intercept, slope, r_squared).
///
/// Used by calibration checks that regress one estimate on another.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Numerical(
            "linear_fit needs two same-length samples of size >= 2".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&u, &v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("linear_fit: x has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((intercept, slope, r2))
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (_, slope, r2) = linear_fit(x, y)?;
    Ok(r2.sqrt().copysign(slope))
}
