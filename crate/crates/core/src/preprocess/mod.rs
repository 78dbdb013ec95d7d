//! Dataset ingestion and cleaning: CSV tables, linear imputation, z-score
//! normalization and a Kolmogorov-Smirnov normality check.

mod ks;
mod table;

pub use ks::{ks_normality, ks_normality_test, kolmogorov_survival, KsResult};
pub use table::{load_schema, load_table, read_table, write_table, Column, FeatureTable, Role, Schema};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An ordered sequence of `(time index, value)` pairs with a missing-value mask.
///
/// Missing points carry `NaN` in `values` and `false` in `observed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeries {
    index: Vec<i64>,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl TimeSeries {
    /// Fully observed series. Every value must be finite.
    pub fn new(index: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        let opts = values.into_iter().map(Some).collect();
        Self::from_options(index, opts)
    }

    /// Series with `None` marking missing points.
    pub fn from_options(index: Vec<i64>, values: Vec<Option<f64>>) -> Result<Self> {
        if index.len() != values.len() {
            return Err(Error::LengthMismatch(index.len(), values.len()));
        }
        check_increasing(&index)?;
        let mut vals = Vec::with_capacity(values.len());
        let mut observed = Vec::with_capacity(values.len());
        for (i, v) in values.into_iter().enumerate() {
            match v {
                Some(x) if x.is_finite() => {
                    vals.push(x);
                    observed.push(true);
                }
                Some(x) => return Err(Error::NonFinite(format!("value {x} at index {}", index[i]))),
                None => {
                    vals.push(f64::NAN);
                    observed.push(false);
                }
            }
        }
        Ok(Self {
            index,
            values: vals,
            observed,
        })
    }

    /// Fully observed series indexed `0..n`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let index = (0..values.len() as i64).collect();
        Self::new(index, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self) -> &[i64] {
        &self.index
    }

    /// Raw values; missing points are `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.observed[i].then(|| self.values[i])
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn missing_count(&self) -> usize {
        self.len() - self.observed_count()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    /// Values of a fully observed series.
    pub fn complete_values(&self) -> Result<&[f64]> {
        if self.is_complete() {
            Ok(&self.values)
        } else {
            Err(Error::MissingValues)
        }
    }

    /// First `n` points.
    pub fn head(&self, n: usize) -> TimeSeries {
        let n = n.min(self.len());
        TimeSeries {
            index: self.index[..n].to_vec(),
            values: self.values[..n].to_vec(),
            observed: self.observed[..n].to_vec(),
        }
    }

    /// Same index, new fully observed values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<TimeSeries> {
        TimeSeries::new(self.index.clone(), values)
    }
}

impl PartialEq for TimeSeries {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.observed == other.observed
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.observed)
                .all(|((a, b), &o)| !o || a == b)
    }
}

fn check_increasing(index: &[i64]) -> Result<()> {
    for w in index.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::NonMonotoneIndex(w[1], w[0]));
        }
    }
    Ok(())
}

/// Fills missing points by straight-line interpolation between the nearest
/// observed neighbours. Leading and trailing gaps take the nearest observed
/// value; nothing is extrapolated.
pub fn impute_linear(s: &TimeSeries) -> Result<TimeSeries> {
    let known: Vec<usize> = (0..s.len()).filter(|&i| s.observed[i]).collect();
    if known.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: known.len(),
        });
    }
    let mut out = s.values.clone();
    let first = known[0];
    let last = *known.last().unwrap();
    for v in &mut out[..first] {
        *v = s.values[first];
    }
    for v in &mut out[last + 1..] {
        *v = s.values[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b == a + 1 {
            continue;
        }
        let (ta, tb) = (s.index[a] as f64, s.index[b] as f64);
        let (ya, yb) = (s.values[a], s.values[b]);
        for i in a + 1..b {
            let w = (s.index[i] as f64 - ta) / (tb - ta);
            out[i] = ya + w * (yb - ya);
        }
    }
    Ok(TimeSeries {
        index: s.index.clone(),
        values: out,
        observed: vec![true; s.len()],
    })
}

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
}

impl NormalizationStats {
    /// Population statistics of `xs`; fails on constant input.
    pub fn fit(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        let mean = crate::mean(xs);
        let std = crate::pop_variance(xs).sqrt();
        if !(std > 0.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Z-score normalization `(x - mean) / std` with the population standard deviation.
pub fn zscore(s: &TimeSeries) -> Result<(TimeSeries, NormalizationStats)> {
    let xs = s.complete_values()?;
    let stats = NormalizationStats::fit(xs)?;
    let z = xs.iter().map(|&x| stats.apply(x)).collect();
    Ok((s.with_values(z)?, stats))
}

/// Undo [`zscore`].
pub fn zscore_inverse(z: &TimeSeries, stats: &NormalizationStats) -> Result<TimeSeries> {
    let xs = z.complete_values()?;
    z.with_values(xs.iter().map(|&v| stats.invert(v)).collect())
}
