//! End-to-end hybrid forecast: ARIMA indicator forecasts feed a random
//! forest per target, Holt-Winters extrapolates each target directly, and the
//! two are blended with convex weights.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, Metrics};
use crate::arima::{self, ArimaOrder, Criterion};
use crate::forest::{self, ForestConfig};
use crate::holt_winters::{self, HwConfig, HwParams};
use crate::preprocess::{FeatureTable, NormalizationStats};
use crate::{Error, Result};

/// Fewest historical rows a pipeline run accepts.
pub const MIN_ROWS: usize = 8;
const TIE_TOLERANCE: f64 = 1e-12;

/// Convex blend: `alpha` on the forest, `beta` on Holt-Winters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        EnsembleWeights { alpha: 0.7, beta: 0.3 }
    }
}

impl EnsembleWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = EnsembleWeights { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !ok(self.alpha) || !ok(self.beta) || (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights must lie in [0, 1] and sum to 1, got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// `alpha·rf + beta·hw`, kept inside `[min(rf, hw), max(rf, hw)]` against
/// rounding.
pub fn combine(rf: f64, hw: f64, w: EnsembleWeights) -> Result<f64> {
    if !rf.is_finite() || !hw.is_finite() {
        return Err(Error::NonFinite(format!("ensemble inputs {rf} and {hw}")));
    }
    w.validate()?;
    Ok((w.alpha * rf + w.beta * hw).clamp(rf.min(hw), rf.max(hw)))
}

/// Best `alpha` on the grid `0, step, ..., 1` by MAE, with that MAE.
///
/// Ties go to the `alpha` closest to 0.7, then to the larger `alpha`.
pub fn grid_search_weights_with_mae(rf: &[f64], hw: &[f64], actual: &[f64], step: f64) -> Result<(EnsembleWeights, f64)> {
    if rf.len() != actual.len() || hw.len() != actual.len() {
        return Err(Error::LengthMismatch(rf.len().max(hw.len()), actual.len()));
    }
    if actual.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let k = grid_divisions(step)?;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=k {
        let alpha = i as f64 / k as f64;
        let w = EnsembleWeights::from_alpha(alpha)?;
        let combined: Vec<f64> = rf.iter().zip(hw).map(|(&r, &h)| combine(r, h, w)).collect::<Result<_>>()?;
        let mae = analysis::mae(actual, &combined)?;
        let take = match best {
            None => true,
            Some((bi, bm)) => {
                let tol = TIE_TOLERANCE * (1.0 + bm.abs());
                if mae < bm - tol {
                    true
                } else if mae <= bm + tol {
                    // |alpha - 0.7| in units of 1/(10k), exact in integers
                    let dist = |j: usize| (10 * j as i64 - 7 * k as i64).abs();
                    dist(i) < dist(bi) || (dist(i) == dist(bi) && i > bi)
                } else {
                    false
                }
            }
        };
        if take {
            best = Some((i, mae));
        }
    }
    let (i, mae) = best.expect("grid has at least two points");
    Ok((EnsembleWeights::from_alpha(i as f64 / k as f64)?, mae))
}

pub fn grid_search_weights(rf: &[f64], hw: &[f64], actual: &[f64], step: f64) -> Result<EnsembleWeights> {
    grid_search_weights_with_mae(rf, hw, actual, step).map(|(w, _)| w)
}

fn grid_divisions(step: f64) -> Result<usize> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step must lie in (0, 1], got {step}")));
    }
    let k = (1.0 / step).round();
    if (k * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("grid step {step} does not divide 1 evenly")));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Fixed(EnsembleWeights),
    GridSearch,
}

impl Default for WeightMode {
    fn default() -> Self {
        WeightMode::Fixed(EnsembleWeights::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArimaSearch {
    pub p_max: usize,
    pub q_max: usize,
    pub criterion: Criterion,
}

impl Default for ArimaSearch {
    fn default() -> Self {
        ArimaSearch {
            p_max: 2,
            q_max: 2,
            criterion: Criterion::Sc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub horizon: usize,
    pub weights: WeightMode,
    pub grid_step: f64,
    /// Trailing rows held out when grid-searching weights.
    pub validation_years: usize,
    pub forest: ForestConfig,
    pub hw: HwConfig,
    pub arima: ArimaSearch,
    /// Recalibrate Holt-Winters on this many trailing residuals.
    pub hw_recalibration_window: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            horizon: 3,
            weights: WeightMode::default(),
            grid_step: 0.05,
            validation_years: 3,
            forest: ForestConfig::default(),
            hw: HwConfig::default(),
            arima: ArimaSearch::default(),
            hw_recalibration_window: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        match self.weights {
            WeightMode::Fixed(w) => w.validate()?,
            WeightMode::GridSearch => {
                if self.validation_years == 0 {
                    return Err(Error::InvalidArgument(
                        "validation_years must be at least 1 when grid-searching".into(),
                    ));
                }
                grid_divisions(self.grid_step)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMethod {
    Arima,
    /// Straight-line continuation of the average historical change, used
    /// when no ARIMA model could be selected.
    Drift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorForecast {
    pub name: String,
    pub method: IndicatorMethod,
    pub order: Option<ArimaOrder>,
    pub values: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Fixed,
    GridSearch,
    /// Grid search was requested but the history was too short to hold out
    /// a validation window; the default weights were used.
    DefaultFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastCell {
    pub year: i64,
    pub combined: f64,
    pub rf: f64,
    pub hw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetForecast {
    pub name: String,
    pub weights: EnsembleWeights,
    pub weight_source: WeightSource,
    pub validation_mae: Option<f64>,
    pub hw_params: HwParams,
    pub rows: Vec<ForecastCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    /// Undefined when the held-out actuals are constant or a single point.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEvaluation {
    pub name: String,
    pub actual: Vec<f64>,
    pub arima: Vec<f64>,
    pub rf: Vec<f64>,
    pub hw: Vec<f64>,
    pub ensemble: Vec<f64>,
    pub scores: Vec<ModelScore>,
}

impl TargetEvaluation {
    pub fn mae_of(&self, model: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.model == model).map(|s| s.mae)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub years: Vec<i64>,
    pub targets: Vec<TargetEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub seed: u64,
    pub horizon: usize,
    pub years: Vec<i64>,
    pub indicators: Vec<IndicatorForecast>,
    pub targets: Vec<TargetForecast>,
    pub evaluation: Option<HoldoutReport>,
    pub warnings: Vec<String>,
}

impl ForecastReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per target and year: combined forecast, both components and
    /// the weights used, six decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["target", "year", "combined", "rf", "hw", "alpha", "beta"])?;
        for t in &self.targets {
            for c in &t.rows {
                w.write_record([
                    t.name.clone(),
                    c.year.to_string(),
                    format!("{:.6}", c.combined),
                    format!("{:.6}", c.rf),
                    format!("{:.6}", c.hw),
                    format!("{:.6}", t.weights.alpha),
                    format!("{:.6}", t.weights.beta),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Indicator forecasts, one row per indicator and year.
    pub fn write_indicator_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["indicator", "year", "value", "method", "order"])?;
        for ind in &self.indicators {
            let method = match ind.method {
                IndicatorMethod::Arima => "arima",
                IndicatorMethod::Drift => "drift",
            };
            let order = ind.order.map(|o| o.to_string()).unwrap_or_default();
            for (year, v) in self.years.iter().zip(&ind.values) {
                w.write_record([
                    ind.name.clone(),
                    year.to_string(),
                    format!("{v:.6}"),
                    method.to_string(),
                    order.clone(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

fn drift_forecast(y: &[f64], horizon: usize) -> Vec<f64> {
    let last = *y.last().expect("non-empty history");
    let slope = if y.len() > 1 {
        (last - y[0]) / (y.len() - 1) as f64
    } else {
        0.0
    };
    (1..=horizon).map(|k| last + k as f64 * slope).collect()
}

fn forecast_indicator(name: &str, y: &[f64], search: &ArimaSearch, horizon: usize) -> IndicatorForecast {
    match arima::select_order(y, search.p_max, search.q_max, search.criterion) {
        Ok(sel) => IndicatorForecast {
            name: name.to_string(),
            method: IndicatorMethod::Arima,
            order: Some(sel.order),
            values: arima::forecast(&sel.fit, horizon),
            error: None,
        },
        Err(e) => IndicatorForecast {
            name: name.to_string(),
            method: IndicatorMethod::Drift,
            order: None,
            values: drift_forecast(y, horizon),
            error: Some(e.to_string()),
        },
    }
}

struct TargetComponents {
    name: String,
    rf: Vec<f64>,
    hw: Vec<f64>,
    hw_params: HwParams,
}

struct Components {
    indicators: Vec<IndicatorForecast>,
    targets: Vec<TargetComponents>,
}

/// Column-wise z-scoring fitted on training rows; constant columns keep unit
/// scale.
fn fit_scalers(rows: &[Vec<f64>], p: usize) -> Vec<NormalizationStats> {
    (0..p)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mean = crate::mean(&col);
            let std = crate::pop_variance(&col).sqrt();
            NormalizationStats {
                mean,
                std: if std > 0.0 { std } else { 1.0 },
            }
        })
        .collect()
}

fn scale(row: &[f64], stats: &[NormalizationStats]) -> Vec<f64> {
    row.iter().zip(stats).map(|(v, s)| s.apply(*v)).collect()
}

fn check_table(table: &FeatureTable) -> Result<()> {
    if table.targets().next().is_none() {
        return Err(Error::InvalidArgument("no target columns".into()));
    }
    if table.indicators().next().is_none() {
        return Err(Error::InvalidArgument("no indicator columns".into()));
    }
    if table.n_rows() < MIN_ROWS {
        return Err(Error::TooFewPoints {
            needed: MIN_ROWS,
            got: table.n_rows(),
        });
    }
    if !table.is_complete() {
        return Err(Error::MissingValues);
    }
    Ok(())
}

fn components(table: &FeatureTable, config: &PipelineConfig, horizon: usize) -> Result<Components> {
    let indicator_cols: Vec<_> = table.indicators().collect();
    let indicators: Vec<IndicatorForecast> = indicator_cols
        .par_iter()
        .map(|c| {
            let y = c.series.complete_values()?;
            Ok(forecast_indicator(&c.name, y, &config.arima, horizon))
        })
        .collect::<Result<_>>()?;

    let history = table.indicator_rows()?;
    let p = indicators.len();
    let stats = fit_scalers(&history, p);
    let train: Vec<Vec<f64>> = history.iter().map(|r| scale(r, &stats)).collect();
    let future: Vec<Vec<f64>> = (0..horizon)
        .map(|k| {
            let raw: Vec<f64> = indicators.iter().map(|f| f.values[k]).collect();
            scale(&raw, &stats)
        })
        .collect();
    let names = table.indicator_names();

    let target_cols: Vec<_> = table.targets().collect();
    let targets = target_cols
        .par_iter()
        .map(|c| -> Result<TargetComponents> {
            let y = c.series.complete_values()?;
            let forest = forest::fit_forest(&train, y, names.clone(), &config.forest)
                .map_err(|e| e.in_stage(format!("forest[{}]", c.name)))?;
            let rf = future.iter().map(|x| forest.predict(x)).collect::<Result<Vec<f64>>>()?;
            let mut hw_fit = holt_winters::fit_hw(&c.series, &config.hw).map_err(|e| e.in_stage(format!("holt-winters[{}]", c.name)))?;
            if let Some(w) = config.hw_recalibration_window {
                hw_fit = holt_winters::recalibrate_from_residuals(&hw_fit, w)
                    .map_err(|e| e.in_stage(format!("holt-winters[{}]", c.name)))?;
            }
            let hw = holt_winters::forecast_hw(&hw_fit, horizon).values().to_vec();
            Ok(TargetComponents {
                name: c.name.clone(),
                rf,
                hw,
                hw_params: hw_fit.params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Components { indicators, targets })
}

/// Weights per target: fixed, or grid-searched on the last
/// `validation_years` rows after refitting every stage on the rows before.
fn choose_weights(table: &FeatureTable, config: &PipelineConfig, warnings: &mut Vec<String>) -> Result<Vec<(EnsembleWeights, WeightSource, Option<f64>)>> {
    let n_targets = table.targets().count();
    let fixed = match config.weights {
        WeightMode::Fixed(w) => return Ok(vec![(w, WeightSource::Fixed, None); n_targets]),
        WeightMode::GridSearch => EnsembleWeights::default(),
    };
    let v = config.validation_years;
    if table.n_rows() < MIN_ROWS + v {
        warnings.push(format!(
            "grid search needs {} rows to hold out {v} validation years, got {}; using default weights",
            MIN_ROWS + v,
            table.n_rows()
        ));
        return Ok(vec![(fixed, WeightSource::DefaultFallback, None); n_targets]);
    }
    let train = table.head(table.n_rows() - v);
    let comps = components(&train, config, v).map_err(|e| e.in_stage("validation"))?;
    table
        .targets()
        .zip(&comps.targets)
        .map(|(col, tc)| {
            let actual = &col.series.values()[table.n_rows() - v..];
            let (w, mae) = grid_search_weights_with_mae(&tc.rf, &tc.hw, actual, config.grid_step)?;
            Ok((w, WeightSource::GridSearch, Some(mae)))
        })
        .collect()
}

/// Runs every stage on a complete table and assembles the report.
pub fn run_pipeline(table: &FeatureTable, config: &PipelineConfig) -> Result<ForecastReport> {
    config.validate()?;
    check_table(table)?;
    let mut warnings = Vec::new();
    let weights = choose_weights(table, config, &mut warnings)?;
    let comps = components(table, config, config.horizon)?;
    let last = *table.years().last().expect("checked non-empty");
    let years: Vec<i64> = (1..=config.horizon as i64).map(|k| last + k).collect();

    for ind in &comps.indicators {
        if let Some(e) = &ind.error {
            warnings.push(format!("indicator {}: {e}; drift forecast used", ind.name));
        }
    }
    let targets = comps
        .targets
        .into_iter()
        .zip(weights)
        .map(|(tc, (w, source, mae))| {
            let rows = years
                .iter()
                .zip(tc.rf.iter().zip(&tc.hw))
                .map(|(&year, (&rf, &hw))| {
                    Ok(ForecastCell {
                        year,
                        combined: combine(rf, hw, w)?,
                        rf,
                        hw,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TargetForecast {
                name: tc.name,
                weights: w,
                weight_source: source,
                validation_mae: mae,
                hw_params: tc.hw_params,
                rows,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastReport {
        seed: config.forest.seed,
        horizon: config.horizon,
        years,
        indicators: comps.indicators,
        targets,
        evaluation: None,
        warnings,
    })
}

fn score(model: &str, actual: &[f64], predicted: &[f64]) -> Result<ModelScore> {
    let mae = analysis::mae(actual, predicted)?;
    let rmse = (actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum::<f64>() / actual.len() as f64).sqrt();
    let r2 = analysis::evaluate(actual, predicted).ok().map(|m: Metrics| m.r2);
    Ok(ModelScore {
        model: model.to_string(),
        mae,
        rmse,
        r2,
    })
}

/// Fits on all but the last `holdout` rows, forecasts them, and scores the
/// ensemble against ARIMA on the target alone, the forest alone and
/// Holt-Winters alone.
pub fn evaluate_holdout(table: &FeatureTable, config: &PipelineConfig, holdout: usize) -> Result<(ForecastReport, HoldoutReport)> {
    if holdout == 0 {
        return Err(Error::InvalidArgument("holdout must be at least 1".into()));
    }
    if table.n_rows() < MIN_ROWS + holdout {
        return Err(Error::TooFewPoints {
            needed: MIN_ROWS + holdout,
            got: table.n_rows(),
        });
    }
    let n_train = table.n_rows() - holdout;
    let train = table.head(n_train);
    let cfg = PipelineConfig {
        horizon: holdout,
        ..config.clone()
    };
    let report = run_pipeline(&train, &cfg)?;
    let targets = table
        .targets()
        .zip(&report.targets)
        .map(|(col, tf)| {
            let all = col.series.complete_values()?;
            let actual = all[n_train..].to_vec();
            let baseline = forecast_indicator(&col.name, &all[..n_train], &config.arima, holdout).values;
            let rf: Vec<f64> = tf.rows.iter().map(|c| c.rf).collect();
            let hw: Vec<f64> = tf.rows.iter().map(|c| c.hw).collect();
            let ensemble: Vec<f64> = tf.rows.iter().map(|c| c.combined).collect();
            let scores = vec![
                score("arima", &actual, &baseline)?,
                score("rf", &actual, &rf)?,
                score("hw", &actual, &hw)?,
                score("ensemble", &actual, &ensemble)?,
            ];
            Ok(TargetEvaluation {
                name: col.name.clone(),
                actual,
                arima: baseline,
                rf,
                hw,
                ensemble,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let holdout_report = HoldoutReport {
        years: table.years()[n_train..].to_vec(),
        targets,
    };
    Ok((report, holdout_report))
}
