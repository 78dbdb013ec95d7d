//! Additive-trend, additive-seasonal Holt-Winters smoothing.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::TimeSeries;
use crate::{Error, Result};

pub const GRID_STEP: f64 = 0.05;
const GRID_POINTS: usize = 21;
const REFINE_MIN_STEP: f64 = 1e-4;
const MAX_REFINE_EVALS: usize = 20_000;
/// Objective values closer than this (relative) are treated as equal.
const TIE_TOLERANCE: f64 = 1e-12;

/// How the seasonal indices are seeded before the recursions start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalInit {
    /// First-cycle deviations from the first-cycle mean.
    #[default]
    FirstCycle,
    /// All indices zero.
    Flat,
}

/// Smoothing parameters left as `None` are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HwConfig {
    pub period: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub seasonal_init: SeasonalInit,
}

impl Default for HwConfig {
    fn default() -> Self {
        HwConfig {
            period: 2,
            alpha: None,
            beta: None,
            gamma: None,
            seasonal_init: SeasonalInit::FirstCycle,
        }
    }
}

impl HwConfig {
    pub fn fixed(alpha: f64, beta: f64, gamma: f64) -> Self {
        HwConfig {
            alpha: Some(alpha),
            beta: Some(beta),
            gamma: Some(gamma),
            ..Default::default()
        }
    }

    fn slots(&self) -> [Option<f64>; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl HwParams {
    fn from_array(a: [f64; 3]) -> Self {
        HwParams {
            alpha: a[0],
            beta: a[1],
            gamma: a[2],
        }
    }

    /// `[alpha, beta, gamma]`.
    pub fn to_array(self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

/// A fitted smoother. `seasonal[j]` is the index for observations whose
/// zero-based position satisfies `t % period == j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HwFit {
    pub config: HwConfig,
    pub params: HwParams,
    pub level: f64,
    pub trend: f64,
    pub seasonal: Vec<f64>,
    /// One-step fitted values for observations `period..n`.
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// Number of leading residuals the parameters were not tuned on.
    pub calibration_offset: usize,
    /// All smoothing parameters ended at zero on non-constant data.
    pub degenerate: bool,
    #[serde(skip)]
    index: Vec<i64>,
    #[serde(skip)]
    series: Vec<f64>,
}

impl HwFit {
    /// Observations consumed by initialization before the first residual.
    pub fn burn_in(&self) -> usize {
        self.config.period
    }

    /// Sum of squared residuals after skipping the first `skip`.
    pub fn sse_after(&self, skip: usize) -> f64 {
        self.residuals.iter().skip(skip).map(|e| e * e).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        writeln!(f, "{}", self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

struct Run {
    level: f64,
    trend: f64,
    seasonal: Vec<f64>,
    fitted: Vec<f64>,
    residuals: Vec<f64>,
}

fn run(y: &[f64], m: usize, p: [f64; 3], init: SeasonalInit) -> Run {
    let [alpha, beta, gamma] = p;
    let first = crate::mean(&y[..m]);
    let second = crate::mean(&y[m..2 * m]);
    let mut level = first;
    let mut trend = (second - first) / m as f64;
    let mut seasonal: Vec<f64> = match init {
        SeasonalInit::FirstCycle => y[..m].iter().map(|v| v - first).collect(),
        SeasonalInit::Flat => vec![0.0; m],
    };
    let mut fitted = Vec::with_capacity(y.len() - m);
    let mut residuals = Vec::with_capacity(y.len() - m);
    for (t, &obs) in y.iter().enumerate().skip(m) {
        let pos = t % m;
        let f = level + trend + seasonal[pos];
        fitted.push(f);
        residuals.push(obs - f);
        let new_level = alpha * (obs - seasonal[pos]) + (1.0 - alpha) * (level + trend);
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        seasonal[pos] = gamma * (obs - new_level) + (1.0 - gamma) * seasonal[pos];
        let drift = crate::mean(&seasonal);
        for s in &mut seasonal {
            *s -= drift;
        }
        level = new_level + drift;
    }
    Run {
        level,
        trend,
        seasonal,
        fitted,
        residuals,
    }
}

fn objective(y: &[f64], m: usize, p: [f64; 3], init: SeasonalInit, skip: usize) -> f64 {
    run(y, m, p, init).residuals[skip..].iter().map(|e| e * e).sum()
}

fn better(candidate: f64, best: f64) -> bool {
    candidate < best - TIE_TOLERANCE * (1.0 + best.abs())
}

fn grid_value(k: usize) -> f64 {
    k as f64 / (GRID_POINTS - 1) as f64
}

/// Every grid point for the free slots, in lexicographic order.
fn grid(slots: [Option<f64>; 3]) -> Vec<[f64; 3]> {
    let axis = |s: Option<f64>| -> Vec<f64> {
        match s {
            Some(v) => vec![v],
            None => (0..GRID_POINTS).map(grid_value).collect(),
        }
    };
    let (a, b, g) = (axis(slots[0]), axis(slots[1]), axis(slots[2]));
    let mut out = Vec::with_capacity(a.len() * b.len() * g.len());
    for &x in &a {
        for &u in &b {
            for &v in &g {
                out.push([x, u, v]);
            }
        }
    }
    out
}

/// Grid search then coordinate descent with step halving over the free slots.
fn optimize(y: &[f64], m: usize, slots: [Option<f64>; 3], init: SeasonalInit, skip: usize) -> [f64; 3] {
    let points = grid(slots);
    let values: Vec<f64> = points.par_iter().map(|&p| objective(y, m, p, init, skip)).collect();
    let mut best_i = 0;
    for (i, &v) in values.iter().enumerate() {
        if better(v, values[best_i]) {
            best_i = i;
        }
    }
    let mut x = points[best_i];
    let mut fx = values[best_i];
    let free: Vec<usize> = (0..3).filter(|&i| slots[i].is_none()).collect();
    let mut step = GRID_STEP / 2.0;
    let mut evals = 0;
    while step >= REFINE_MIN_STEP && evals < MAX_REFINE_EVALS {
        let mut moved = false;
        for &i in &free {
            for dir in [-1.0, 1.0] {
                let mut c = x;
                c[i] = (c[i] + dir * step).clamp(0.0, 1.0);
                if c[i] == x[i] {
                    continue;
                }
                let fc = objective(y, m, c, init, skip);
                evals += 1;
                if better(fc, fx) {
                    x = c;
                    fx = fc;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    x
}

fn validate(config: &HwConfig, y: &[f64]) -> Result<()> {
    let m = config.period;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("seasonal period must be at least 2, got {m}")));
    }
    if y.len() < 2 * m {
        return Err(Error::TooFewPoints {
            needed: 2 * m,
            got: y.len(),
        });
    }
    for (name, v) in ["alpha", "beta", "gamma"].iter().zip(config.slots()) {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingValues);
    }
    Ok(())
}

fn is_constant(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

fn assemble(config: HwConfig, p: [f64; 3], index: Vec<i64>, y: Vec<f64>, offset: usize) -> HwFit {
    let r = run(&y, config.period, p, config.seasonal_init);
    let sse = r.residuals.iter().map(|e| e * e).sum();
    HwFit {
        config,
        params: HwParams::from_array(p),
        level: r.level,
        trend: r.trend,
        seasonal: r.seasonal,
        fitted: r.fitted,
        residuals: r.residuals,
        sse,
        calibration_offset: offset,
        degenerate: p == [0.0; 3] && !is_constant(&y),
        index,
        series: y,
    }
}

/// Fits the smoother to a fully observed series.
pub fn fit_hw(s: &TimeSeries, config: &HwConfig) -> Result<HwFit> {
    let y = s.complete_values()?.to_vec();
    validate(config, &y)?;
    let slots = config.slots();
    if slots.iter().all(|v| *v == Some(0.0)) && !is_constant(&y) {
        return Err(Error::InvalidArgument(
            "all smoothing parameters are zero on non-constant data (degenerate)".into(),
        ));
    }
    let p = if slots.iter().all(Option::is_some) {
        slots.map(|v| v.unwrap())
    } else {
        optimize(&y, config.period, slots, config.seasonal_init, 0)
    };
    Ok(assemble(*config, p, s.index().to_vec(), y, 0))
}

pub fn fit_hw_values(y: &[f64], config: &HwConfig) -> Result<HwFit> {
    fit_hw(&TimeSeries::from_values(y.to_vec())?, config)
}

/// `ŷ(n+k) = level + k·trend + seasonal[(n+k-1) % m]`, indexed after the last
/// observed index in unit steps.
pub fn forecast_hw(fit: &HwFit, horizon: usize) -> TimeSeries {
    let n = fit.series.len();
    let m = fit.config.period;
    let last = fit.index.last().copied().unwrap_or(-1);
    let values: Vec<f64> = (1..=horizon)
        .map(|k| fit.level + k as f64 * fit.trend + fit.seasonal[(n + k - 1) % m])
        .collect();
    let index = (1..=horizon as i64).map(|k| last + k).collect();
    TimeSeries::new(index, values).expect("forecast index is increasing")
}

/// Re-optimizes all three smoothing parameters against the most recent
/// `window` residuals only. The input fit is left untouched.
pub fn recalibrate_from_residuals(fit: &HwFit, window: usize) -> Result<HwFit> {
    let m = fit.config.period;
    let len = fit.residuals.len();
    if window < m {
        return Err(Error::InvalidArgument(format!(
            "recalibration window {window} is shorter than the period {m}"
        )));
    }
    if window > len {
        return Err(Error::TooFewPoints {
            needed: window,
            got: len,
        });
    }
    let offset = len - window;
    let p = optimize(&fit.series, m, [None; 3], fit.config.seasonal_init, offset);
    let config = HwConfig {
        alpha: Some(p[0]),
        beta: Some(p[1]),
        gamma: Some(p[2]),
        ..fit.config
    };
    Ok(assemble(config, p, fit.index.clone(), fit.series.clone(), offset))
}
