//! Sample statistics, the Student t distribution and Welch's t-test.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub count: usize,
}

impl SampleStats {
    pub fn new(mean: f64, std: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::TooFewSamples(count));
        }
        if std < 0.0 || !mean.is_finite() || !std.is_finite() {
            return Err(Error::InvalidConfig(format!("bad sample stats mean={mean} std={std}")));
        }
        Ok(Self { mean, std, count })
    }

    fn var_of_mean(&self) -> f64 {
        self.std * self.std / self.count as f64
    }
}

/// Mean and n − 1 standard deviation, by Welford's update.
pub fn summarize(values: &[f64]) -> Result<SampleStats> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples(values.len()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = (m2 / (values.len() - 1) as f64).max(0.0);
    Ok(SampleStats {
        mean,
        std: var.sqrt(),
        count: values.len(),
    })
}

/// CDF of Student's t with `nu` (possibly fractional) degrees of freedom.
pub fn t_cdf(t: f64, nu: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = nu / (nu + t * t);
    let tail = 0.5 * beta_reg(nu / 2.0, 0.5, x);
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Quantile of Student's t by bisection on [`t_cdf`].
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0, 1)");
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t_cdf(lo, nu) > p {
        lo *= 2.0;
    }
    while t_cdf(hi, nu) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if t_cdf(mid, nu) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchReport {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom, unrounded.
    pub df: f64,
    /// `P(T_df ≤ t)`, the p-value for the alternative `μ₁ < μ₂`.
    pub p_one_tailed: f64,
    pub ci95: [f64; 2],
    pub g1: SampleStats,
    pub g2: SampleStats,
}

/// One-tailed Welch test of `μ₁ < μ₂` with a two-sided 95% interval for `μ₁ − μ₂`.
pub fn welch_one_tailed(g1: &SampleStats, g2: &SampleStats) -> Result<WelchReport> {
    for g in [g1, g2] {
        if g.count < 2 {
            return Err(Error::TooFewSamples(g.count));
        }
    }
    if g1.std == 0.0 && g2.std == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let (v1, v2) = (g1.var_of_mean(), g2.var_of_mean());
    let se = (v1 + v2).sqrt();
    let diff = g1.mean - g2.mean;
    let t = diff / se;
    let df = (v1 + v2).powi(2)
        / (v1 * v1 / (g1.count - 1) as f64 + v2 * v2 / (g2.count - 1) as f64);
    let q = t_quantile(0.975, df);
    Ok(WelchReport {
        t,
        df,
        p_one_tailed: t_cdf(t, df),
        ci95: [diff - q * se, diff + q * se],
        g1: *g1,
        g2: *g2,
    })
}
