//! Stationarity and correlation-structure diagnostics: differencing, sample
//! ACF/PACF and the augmented Dickey-Fuller test with intercept and trend.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::ols;
use crate::preprocess::TimeSeries;
use crate::{Error, Result};

/// `d`-th order differences of a series; the index loses its first `d` stamps.
pub fn difference(s: &TimeSeries, d: usize) -> Result<TimeSeries> {
    let vals = difference_values(s.complete_values()?, d)?;
    TimeSeries::new(s.index()[d..].to_vec(), vals)
}

pub fn difference_values(xs: &[f64], d: usize) -> Result<Vec<f64>> {
    if d >= xs.len() && d > 0 {
        return Err(Error::TooFewPoints {
            needed: d + 1,
            got: xs.len(),
        });
    }
    let mut out = xs.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverts `d`-fold differencing.
///
/// `anchors` are the last `d` original values preceding the first element of
/// `diffs`. The result continues the original series.
pub fn undifference(diffs: &[f64], anchors: &[f64], d: usize) -> Result<Vec<f64>> {
    if anchors.len() != d {
        return Err(Error::InvalidArgument(format!(
            "expected {d} anchor values, got {}",
            anchors.len()
        )));
    }
    // Last value of each intermediate differencing level, level 0 = original.
    let mut last: Vec<f64> = (0..d)
        .map(|k| *difference_values(anchors, k).expect("k < d").last().unwrap())
        .collect();
    let mut out = Vec::with_capacity(diffs.len());
    for &dx in diffs {
        let mut v = dx;
        for level in (0..d).rev() {
            v += last[level];
            last[level] = v;
        }
        out.push(v);
    }
    Ok(out)
}

/// Sample autocorrelations `rho_0..=rho_max_lag` of the mean-centred series.
pub fn acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = xs.len();
    if max_lag >= n {
        return Err(Error::TooFewPoints {
            needed: max_lag + 1,
            got: n,
        });
    }
    let m = crate::mean(xs);
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let denom: f64 = c.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / denom
            }
        })
        .collect())
}

/// Durbin-Levinson recursion on autocorrelations `r[0..=K]` (with `r[0] = 1`).
///
/// Returns the partial autocorrelations `phi_kk` for `k = 0..=K` (lag 0 set to
/// 1) and the order-`K` autoregressive coefficients.
pub fn durbin_levinson(r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k_max = r.len().saturating_sub(1);
    let mut pacf = vec![1.0];
    let mut phi: Vec<f64> = Vec::new();
    let mut v: f64 = 1.0;
    for k in 1..=k_max {
        let num = r[k] - phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum::<f64>();
        if v.abs() < 1e-12 {
            return Err(Error::Singular(format!("Durbin-Levinson breakdown at lag {k}")));
        }
        let a = num / v;
        let mut next: Vec<f64> = (0..k - 1).map(|j| phi[j] - a * phi[k - 2 - j]).collect();
        next.push(a);
        phi = next;
        v *= 1.0 - a * a;
        pacf.push(a);
    }
    Ok((pacf, phi))
}

/// Sample partial autocorrelations `phi_00..=phi_KK`; requires `max_lag < n/2`.
pub fn pacf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if 2 * max_lag >= xs.len() {
        return Err(Error::TooFewPoints {
            needed: 2 * max_lag + 1,
            got: xs.len(),
        });
    }
    let r = acf(xs, max_lag)?;
    let (p, _) = durbin_levinson(&r)?;
    Ok(p)
}

/// ACF, PACF and the approximate 95% white-noise band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramResult {
    pub lags: Vec<usize>,
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    pub band: f64,
}

pub fn correlogram(xs: &[f64], max_lag: usize) -> Result<CorrelogramResult> {
    Ok(CorrelogramResult {
        lags: (0..=max_lag).collect(),
        acf: acf(xs, max_lag)?,
        pacf: pacf(xs, max_lag)?,
        band: 1.96 / (xs.len() as f64).sqrt(),
    })
}

impl CorrelogramResult {
    /// CSV with columns `lag,acf,pacf,band`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["lag", "acf", "pacf", "band"])?;
        for (i, lag) in self.lags.iter().enumerate() {
            w.write_record(&[
                lag.to_string(),
                format!("{:.6}", self.acf[i]),
                format!("{:.6}", self.pacf[i]),
                format!("{:.6}", self.band),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<correlogram>".into(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub one: f64,
    pub five: f64,
    pub ten: f64,
}

/// Regression coefficients of the ADF test equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfCoefficients {
    pub intercept: f64,
    pub trend: f64,
    /// Coefficient on the lagged level, `rho - 1`.
    pub level: f64,
    /// Coefficients on the lagged differences.
    pub lags: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// t-ratio of the lagged-level coefficient.
    pub statistic: f64,
    pub coefficients: AdfCoefficients,
    pub lag_order: usize,
    pub nobs: usize,
    pub critical_values: CriticalValues,
    /// `statistic` below the 5% critical value.
    pub is_stationary: bool,
}

// Dickey-Fuller tau critical values with constant and linear trend
// (Fuller 1976, Table 8.5.2; also Hamilton 1994, Table B.6, case 4).
const DF_TREND_SIZES: [f64; 6] = [25.0, 50.0, 100.0, 250.0, 500.0, f64::INFINITY];
const DF_TREND_1: [f64; 6] = [-4.38, -4.15, -4.04, -3.99, -3.98, -3.96];
const DF_TREND_5: [f64; 6] = [-3.60, -3.50, -3.45, -3.43, -3.42, -3.41];
const DF_TREND_10: [f64; 6] = [-3.24, -3.18, -3.15, -3.13, -3.13, -3.12];

/// Tabulated critical values, linearly interpolated in `1/n` and clamped to
/// the `n = 25` row for shorter samples.
pub fn adf_critical_values(n: usize) -> CriticalValues {
    let inv = 1.0 / n as f64;
    let interp = |table: &[f64; 6]| -> f64 {
        let inv_sizes: Vec<f64> = DF_TREND_SIZES.iter().map(|s| 1.0 / s).collect();
        if inv >= inv_sizes[0] {
            return table[0];
        }
        for i in 0..5 {
            let (a, b) = (inv_sizes[i], inv_sizes[i + 1]);
            if inv <= a && inv >= b {
                let w = (a - inv) / (a - b);
                return table[i] + w * (table[i + 1] - table[i]);
            }
        }
        table[5]
    };
    CriticalValues {
        one: interp(&DF_TREND_1),
        five: interp(&DF_TREND_5),
        ten: interp(&DF_TREND_10),
    }
}

/// Default maximum augmentation lag: Schwert's `12 (n/100)^(1/4)`, capped at
/// `n/4` and by the degrees of freedom of the test regression.
pub fn default_adf_max_lag(n: usize) -> usize {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let df_cap = n.saturating_sub(7) / 2;
    schwert.min(n / 4).min(df_cap)
}

struct AdfRegression {
    coefficients: Vec<f64>,
    std_errors: Vec<f64>,
    ssr: f64,
    nobs: usize,
}

fn adf_regression(y: &[f64], lags: usize, start: usize) -> Result<AdfRegression> {
    let n = y.len();
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // Row for time t (t >= start) regresses dy[t-1] = y_t - y_{t-1}.
    let rows: Vec<usize> = (start..n).collect();
    let k = 3 + lags;
    let x = DMatrix::from_fn(rows.len(), k, |r, j| {
        let t = rows[r];
        match j {
            0 => 1.0,
            1 => t as f64,
            2 => y[t - 1],
            _ => dy[t - 1 - (j - 2)],
        }
    });
    let resp: Vec<f64> = rows.iter().map(|&t| dy[t - 1]).collect();
    let fit = ols(&x, &resp).map_err(|e| match e {
        Error::Singular(m) => Error::DegenerateRegression(m),
        other => other,
    })?;
    if !(fit.ssr > 1e-20 * resp.iter().map(|v| v * v).sum::<f64>().max(1e-300)) {
        return Err(Error::DegenerateRegression("perfect fit".into()));
    }
    Ok(AdfRegression {
        coefficients: fit.coefficients,
        std_errors: fit.std_errors,
        ssr: fit.ssr,
        nobs: rows.len(),
    })
}

/// Augmented Dickey-Fuller test with intercept and linear trend.
///
/// The augmentation order is chosen by minimising AIC over `0..=max_lag` on a
/// common sample, then the chosen regression is refit on all usable rows.
/// `None` uses [`default_adf_max_lag`].
pub fn adf_test(y: &[f64], max_lag: Option<usize>) -> Result<AdfResult> {
    let n = y.len();
    if n < 10 {
        return Err(Error::TooFewPoints { needed: 10, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues);
    }
    if crate::pop_variance(y) == 0.0 {
        return Err(Error::DegenerateRegression("constant series".into()));
    }
    let max_lag = match max_lag {
        Some(m) => {
            if m > n / 4 || n < 2 * m + 7 {
                return Err(Error::TooFewPoints {
                    needed: (4 * m).max(2 * m + 7),
                    got: n,
                });
            }
            m
        }
        None => default_adf_max_lag(n),
    };

    let mut best: Option<(usize, f64)> = None;
    for p in 0..=max_lag {
        let reg = adf_regression(y, p, max_lag + 1)?;
        let nobs = reg.nobs as f64;
        let aic = nobs * (reg.ssr / nobs).ln() + 2.0 * (3 + p) as f64;
        if best.is_none_or(|(_, b)| aic < b) {
            best = Some((p, aic));
        }
    }
    let lag_order = best.expect("at least lag 0").0;
    let reg = adf_regression(y, lag_order, lag_order + 1)?;
    let statistic = reg.coefficients[2] / reg.std_errors[2];
    if !statistic.is_finite() {
        return Err(Error::DegenerateRegression("non-finite t-ratio".into()));
    }
    let critical_values = adf_critical_values(n);
    Ok(AdfResult {
        statistic,
        coefficients: AdfCoefficients {
            intercept: reg.coefficients[0],
            trend: reg.coefficients[1],
            level: reg.coefficients[2],
            lags: reg.coefficients[3..].to_vec(),
        },
        lag_order,
        nobs: reg.nobs,
        critical_values,
        is_stationary: statistic < critical_values.five,
    })
}
