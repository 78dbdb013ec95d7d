use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::TimeSeries;
use crate::{Error, Result};

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of `s` against a normal distribution with the sample's mean and
/// (population) standard deviation.
///
/// The p-value comes from the limiting Kolmogorov distribution of
/// `sqrt(n) * D`. Because the reference parameters are estimated from the same
/// data, it is conservative (too large) compared with a Lilliefors test.
pub fn ks_normality_test(s: &TimeSeries) -> Result<KsResult> {
    ks_normality(s.complete_values()?)
}

pub fn ks_normality(xs: &[f64]) -> Result<KsResult> {
    let n = xs.len();
    if n < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: n });
    }
    let mean = crate::mean(xs);
    let sd = crate::pop_variance(xs).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal_cdf((x - mean) / sd);
        let above = (i + 1) as f64 / nf - f;
        let below = f - i as f64 / nf;
        d = d.max(above).max(below);
    }
    let d = d.clamp(0.0, 1.0);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(nf.sqrt() * d),
    })
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let p = if x < 1.0 {
        // Jacobi theta form converges fast for small arguments.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * c).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * cdf
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}
