//! Non-seasonal ARIMA(p, d, q) models fitted by conditional sum of squares.
//!
//! On the `d`-times differenced series `w` the model is
//!
//! ```text
//! w_t = c + phi_1 w_{t-1} + ... + phi_p w_{t-p} + e_t + theta_1 e_{t-1} + ... + theta_q e_{t-q}
//! ```
//!
//! Residuals are computed from `t0 = max(p, q)` onward with earlier shocks set
//! to zero. Pure AR models are solved in closed form by least squares; models
//! with MA terms are minimised with Nelder-Mead.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{acf, adf_test, difference_values, durbin_levinson, undifference, AdfResult};
use crate::linalg::{companion_spectral_radius, ols};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::{Error, Result};

/// Highest differencing order considered.
pub const MAX_D: usize = 2;

/// Iteration cap of the simplex optimiser.
pub const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        if d > MAX_D {
            return Err(Error::InvalidArgument(format!("d = {d} exceeds the cap of {MAX_D}")));
        }
        Ok(Self { p, d, q })
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    #[default]
    Sc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Residuals from the end of the conditioning burn-in onward.
    pub residuals: Vec<f64>,
    pub css: f64,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub sc: f64,
    pub converged: bool,
    pub iterations: usize,
    /// All roots of the AR polynomial lie outside the unit circle.
    pub ar_stationary: bool,
    /// All roots of the MA polynomial lie outside the unit circle.
    pub ma_invertible: bool,
    differenced: Vec<f64>,
    anchors: Vec<f64>,
}

impl ArimaFit {
    pub fn n_eff(&self) -> usize {
        self.residuals.len()
    }

    pub fn criterion(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Sc => self.sc,
        }
    }

    fn burn_in(&self) -> usize {
        self.order.p.max(self.order.q)
    }
}

/// Per-observation information criteria `AIC = -2 lnL/n + 2k/n` and
/// `SC = -2 lnL/n + k ln(n)/n`, with `k = p + q`.
///
/// The SC penalty exceeds the AIC penalty once `ln n > 2` (n >= 8).
pub fn information_criteria(log_likelihood: f64, n: usize, k: usize) -> (f64, f64) {
    let nf = n as f64;
    let base = -2.0 * log_likelihood / nf;
    (base + 2.0 * k as f64 / nf, base + k as f64 * nf.ln() / nf)
}

/// Gaussian log-likelihood at the CSS variance estimate `css / n`.
pub fn css_log_likelihood(css: f64, n: usize) -> f64 {
    let nf = n as f64;
    let sigma2 = css / nf;
    -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

fn css_residuals(w: &[f64], c: f64, ar: &[f64], ma: &[f64], t0: usize) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in t0..w.len() {
        let mut v = w[t] - c;
        for (i, phi) in ar.iter().enumerate() {
            v -= phi * w[t - i - 1];
        }
        for (j, theta) in ma.iter().enumerate() {
            v -= theta * e[t - j - 1];
        }
        e[t] = v;
    }
    e
}

/// Fits an ARIMA model of the given order by conditional least squares.
pub fn fit_css(y: &[f64], order: ArimaOrder) -> Result<ArimaFit> {
    let ArimaOrder { p, d, q } = ArimaOrder::new(order.p, order.d, order.q)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues);
    }
    let k = p + q + 1;
    if y.len() <= d || y.len() - d <= 3 * k {
        return Err(Error::TooFewPoints {
            needed: 3 * k + 1 + d,
            got: y.len(),
        });
    }
    let w = difference_values(y, d)?;
    let t0 = p.max(q);
    let m = w.len();

    let (intercept, ar, ma, converged, iterations) = if q == 0 {
        let x = DMatrix::from_fn(m - t0, p + 1, |r, j| if j == 0 { 1.0 } else { w[t0 + r - j] });
        let fit = ols(&x, &w[t0..])?;
        (fit.coefficients[0], fit.coefficients[1..].to_vec(), vec![], true, 0)
    } else {
        let ar0 = if p > 0 {
            acf(&w, p)
                .and_then(|r| durbin_levinson(&r))
                .map(|(_, phi)| phi)
                .unwrap_or_else(|_| vec![0.0; p])
        } else {
            vec![]
        };
        let mean = crate::mean(&w);
        let c0 = mean * (1.0 - ar0.iter().sum::<f64>());
        let sd = crate::pop_variance(&w).sqrt();
        let mut x0 = vec![c0];
        x0.extend(&ar0);
        x0.extend(std::iter::repeat_n(0.0, q));
        let mut steps = vec![if sd > 0.0 { 0.1 * sd } else { 0.1 }];
        steps.extend(std::iter::repeat_n(0.1, p + q));
        let objective = |theta: &[f64]| -> f64 {
            let e = css_residuals(&w, theta[0], &theta[1..=p], &theta[p + 1..], t0);
            e[t0..].iter().map(|v| v * v).sum()
        };
        let opts = NelderMeadOptions {
            max_iter: MAX_ITER,
            f_tol: 1e-10,
            x_tol: 1e-7,
        };
        let min = nelder_mead(objective, &x0, &steps, opts);
        if !min.value.is_finite() {
            return Err(Error::NonConvergence(min.iterations));
        }
        let x = min.x;
        (x[0], x[1..=p].to_vec(), x[p + 1..].to_vec(), min.converged, min.iterations)
    };

    let e = css_residuals(&w, intercept, &ar, &ma, t0);
    let residuals = e[t0..].to_vec();
    let n_eff = residuals.len();
    let css: f64 = residuals.iter().map(|v| v * v).sum();
    let sigma2 = css / n_eff as f64;
    let log_likelihood = css_log_likelihood(css, n_eff);
    let (aic, sc) = information_criteria(log_likelihood, n_eff, p + q);
    let neg_ma: Vec<f64> = ma.iter().map(|t| -t).collect();
    Ok(ArimaFit {
        order: ArimaOrder { p, d, q },
        intercept,
        ar_stationary: companion_spectral_radius(&ar) < 1.0,
        ma_invertible: companion_spectral_radius(&neg_ma) < 1.0,
        ar,
        ma,
        residuals,
        css,
        sigma2,
        log_likelihood,
        aic,
        sc,
        converged,
        iterations,
        differenced: w,
        anchors: y[y.len() - d..].to_vec(),
    })
}

/// Point forecasts on the original scale, future shocks set to zero.
pub fn forecast(fit: &ArimaFit, horizon: usize) -> Vec<f64> {
    let m = fit.differenced.len();
    let t0 = fit.burn_in();
    let mut w = fit.differenced.clone();
    let mut e = vec![0.0; m];
    e[t0..].copy_from_slice(&fit.residuals);
    for _ in 0..horizon {
        let t = w.len();
        let mut v = fit.intercept;
        for (i, phi) in fit.ar.iter().enumerate() {
            v += phi * w[t - i - 1];
        }
        for (j, theta) in fit.ma.iter().enumerate() {
            v += theta * e[t - j - 1];
        }
        w.push(v);
        e.push(0.0);
    }
    undifference(&w[m..], &fit.anchors, fit.order.d).expect("anchor count equals d")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub p: usize,
    pub q: usize,
    pub aic: f64,
    pub sc: f64,
}

/// Outcome of [`select_order`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub order: ArimaOrder,
    pub fit: ArimaFit,
    pub criterion: Criterion,
    /// ADF results for each differencing order tried, `None` where the
    /// differenced series was constant.
    pub stationarity: Vec<Option<AdfResult>>,
    /// Every candidate that fitted and converged.
    pub candidates: Vec<CandidateScore>,
}

/// Smallest `d` in `0..=2` whose differenced series passes the ADF test.
///
/// A constant differenced series counts as stationary; a degenerate ADF
/// regression on a non-constant series counts as non-stationary.
pub fn choose_d(y: &[f64]) -> Result<(usize, Vec<Option<AdfResult>>)> {
    let mut tests = Vec::new();
    for d in 0..=MAX_D {
        let w = difference_values(y, d)?;
        if crate::pop_variance(&w) == 0.0 {
            tests.push(None);
            return Ok((d, tests));
        }
        match adf_test(&w, None) {
            Ok(r) => {
                let ok = r.is_stationary;
                tests.push(Some(r));
                if ok {
                    return Ok((d, tests));
                }
            }
            Err(Error::DegenerateRegression(_)) => tests.push(None),
            Err(e) => return Err(e),
        }
    }
    Err(Error::NonStationary(MAX_D))
}

/// Picks `d` with [`choose_d`], then fits every `(p, q)` up to the bounds and
/// keeps the candidate with the lowest criterion. Ties go to the smaller
/// `p + q`, then the smaller `p`.
pub fn select_order(y: &[f64], p_max: usize, q_max: usize, criterion: Criterion) -> Result<Selection> {
    if p_max > 5 || q_max > 5 {
        return Err(Error::InvalidArgument("p_max and q_max must be at most 5".into()));
    }
    let (d, stationarity) = choose_d(y)?;
    let grid: Vec<(usize, usize)> = (0..=p_max).flat_map(|p| (0..=q_max).map(move |q| (p, q))).collect();
    let fits: Vec<Option<ArimaFit>> = grid
        .par_iter()
        .map(|&(p, q)| {
            fit_css(y, ArimaOrder { p, d, q })
                .ok()
                .filter(|f| f.converged && !f.criterion(criterion).is_nan())
        })
        .collect();
    let mut best: Option<&ArimaFit> = None;
    for f in fits.iter().flatten() {
        let better = match best {
            None => true,
            Some(b) => {
                let (cf, cb) = (f.criterion(criterion), b.criterion(criterion));
                let key_f = (f.order.p + f.order.q, f.order.p);
                let key_b = (b.order.p + b.order.q, b.order.p);
                cf < cb || (cf == cb && key_f < key_b)
            }
        };
        if better {
            best = Some(f);
        }
    }
    let fit = best.cloned().ok_or(Error::NonConvergence(MAX_ITER))?;
    let candidates = fits
        .iter()
        .flatten()
        .map(|f| CandidateScore {
            p: f.order.p,
            q: f.order.q,
            aic: f.aic,
            sc: f.sc,
        })
        .collect();
    Ok(Selection {
        order: fit.order,
        fit,
        criterion,
        stationarity,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseReport {
    pub pass: bool,
    pub violating_lags: Vec<usize>,
    pub acf: Vec<f64>,
    pub band: f64,
}

/// Residuals pass when every autocorrelation at lags `1..=max_lag` lies
/// strictly inside `±1.96/sqrt(n)`.
pub fn residual_white_noise_check(fit: &ArimaFit, max_lag: usize) -> Result<WhiteNoiseReport> {
    white_noise_check(&fit.residuals, max_lag)
}

pub fn white_noise_check(residuals: &[f64], max_lag: usize) -> Result<WhiteNoiseReport> {
    let n = residuals.len();
    if n <= max_lag {
        return Err(Error::TooFewPoints {
            needed: max_lag + 1,
            got: n,
        });
    }
    let band = 1.96 / (n as f64).sqrt();
    if max_lag == 0 {
        return Ok(WhiteNoiseReport {
            pass: true,
            violating_lags: vec![],
            acf: vec![1.0],
            band,
        });
    }
    let r = acf(residuals, max_lag)?;
    let violating_lags: Vec<usize> = (1..=max_lag).filter(|&k| r[k].abs() >= band).collect();
    Ok(WhiteNoiseReport {
        pass: violating_lags.is_empty(),
        violating_lags,
        acf: r,
        band,
    })
}
