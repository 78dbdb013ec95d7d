//! Hybrid annual-series forecasting.
//!
//! The toolkit combines three forecasters:
//!
//! * ARIMA models, selected by information criteria after ADF-driven
//!   differencing, forecast each explanatory indicator forward;
//! * a regression random forest maps indicator vectors to each target and is
//!   evaluated on the forecast indicators;
//! * additive Holt-Winters smoothing extrapolates each target directly.
//!
//! The forest and Holt-Winters forecasts are blended with fixed or
//! grid-searched convex weights. Supporting modules provide preprocessing,
//! stationarity diagnostics, Spearman correlation, error metrics and
//! single-factor / Sobol sensitivity analysis.

pub mod analysis;
pub mod arima;
pub mod diagnostics;
mod error;
pub mod forest;
pub mod holt_winters;
pub mod linalg;
pub mod optim;
pub mod pipeline;
pub mod preprocess;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use preprocess::{FeatureTable, Role, Schema, TimeSeries};

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divide by n).
pub(crate) fn pop_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}
