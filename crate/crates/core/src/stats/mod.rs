//! Statistical kernel: tail probabilities, moment statistics and the
//! chi-square homogeneity test.

mod homogeneity;
pub mod special;

pub use homogeneity::{
    chi2_homogeneity, chi2_homogeneity_with, ChiSquareReport, ChiSquareTerm, ContingencyTable,
    ExpectedMode, Verdict,
};

use crate::error::{Error, Result};
use crate::math::{erfc, sqrt};

/// Upper-tail probability of the chi-square distribution.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("chi-square needs df >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument("chi-square statistic must be >= 0".into()));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(special::gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Two-tailed Student t probability `P(|T| >= |t|)`.
pub fn student_t_two_tail(t: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("Student t needs df >= 1".into()));
    }
    if t.is_nan() {
        return Err(Error::InvalidArgument("t statistic is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let nu = df as f64;
    let t2 = t * t;
    let x = nu / (nu + t2);
    let one_minus_x = t2 / (nu + t2);
    Ok(special::beta_inc_split(nu / 2.0, 0.5, x, one_minus_x).clamp(0.0, 1.0))
}

/// Standard normal upper tail, `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / core::f64::consts::SQRT_2)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Central moments of order 2, 3 and 4 with divisor `m`.
fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let mu = mean(x);
    let m = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / m, m3 / m, m4 / m)
}

/// Population (divisor `m`) variance.
pub fn variance(x: &[f64]) -> f64 {
    central_moments(x).0
}

/// Maximum-likelihood normal fit: sample mean and divisor-`m` deviation.
pub fn normal_mle(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("normal fit needs at least 2 values".into()));
    }
    Ok((mean(x), sqrt(variance(x))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Jarque-Bera normality test using population moment estimators.
pub fn jarque_bera(x: &[f64]) -> Result<JarqueBera> {
    if x.len() < 4 {
        return Err(Error::InvalidArgument("Jarque-Bera needs at least 4 values".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Jarque-Bera needs finite values".into()));
    }
    let (m2, m3, m4) = central_moments(x);
    let mu = mean(x);
    if m2 <= f64::EPSILON * f64::EPSILON * mu * mu || m2 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let skewness = m3 / (m2 * sqrt(m2));
    let kurtosis = m4 / (m2 * m2);
    let n = x.len() as f64;
    let excess = kurtosis - 3.0;
    let statistic = n / 6.0 * (skewness * skewness + excess * excess / 4.0);
    Ok(JarqueBera {
        statistic,
        p_value: chi2_sf(statistic, 2)?,
        skewness,
        kurtosis,
    })
}

/// Squared Pearson correlation; zero when either side is constant.
pub fn pearson_r2(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
}
