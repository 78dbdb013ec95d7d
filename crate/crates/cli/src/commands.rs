use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use hybrid_forecast::analysis::{self, Sidedness};
use hybrid_forecast::forest::{fit_forest, write_importance_csv, ForestConfig, ImportanceRow};
use hybrid_forecast::linalg::ols_with_intercept;
use hybrid_forecast::pipeline::{self, EnsembleWeights, HoldoutReport, PipelineConfig, WeightMode};
use hybrid_forecast::preprocess::{self, ks_normality_test, Column};
use hybrid_forecast::{Error, ErrorKind, FeatureTable, Role, Schema};
use serde::Serialize;
use serde_json::json;

use crate::{BasePoint, Common, ForestArgs, ModelKind};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Write { .. } => ErrorKind::Data,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Write { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Collects written files and stamps the run metadata sidecar last.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
    started: Instant,
    started_at: f64,
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
            started_at: unix_seconds(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> hybrid_forecast::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn finish(mut self, command: &str, seed: u64, argv: &[String]) -> Result<()> {
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "args": argv,
            "started_at_unix": self.started_at,
            "elapsed_seconds": self.started.elapsed().as_secs_f64(),
            "outputs": self.written,
        });
        self.write_json("run_metadata.json", &meta)
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.forest.seed = seed;
    }
    Ok(config)
}

fn apply_forest_args(config: &mut ForestConfig, args: &ForestArgs) {
    if let Some(t) = args.trees {
        config.n_trees = t;
    }
    if args.max_depth.is_some() {
        config.max_depth = args.max_depth;
    }
    if args.mtry.is_some() {
        config.mtry = args.mtry;
    }
}

fn load_schema(common: &Common) -> Result<Option<Schema>> {
    Ok(match &common.schema {
        Some(p) => Some(preprocess::load_schema(p)?),
        None => None,
    })
}

/// Loads the input and fills gaps by linear interpolation, noting how many.
fn load_complete(common: &Common, warnings: &mut Vec<String>) -> Result<FeatureTable> {
    let schema = load_schema(common)?;
    let table = preprocess::load_table(&common.input, schema.as_ref())?;
    if table.is_complete() {
        return Ok(table);
    }
    warnings.push(format!(
        "imputed {} missing cells by linear interpolation",
        table.missing_cells()
    ));
    Ok(table.impute()?)
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Serialize)]
struct ColumnReport {
    name: String,
    role: Role,
    missing: usize,
    ks_statistic: Option<f64>,
    ks_p_value: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct PrepReport {
    seed: u64,
    rows: usize,
    missing_cells: usize,
    total_cells: usize,
    missing_rate: f64,
    columns: Vec<ColumnReport>,
}

pub fn prep(common: &Common, argv: &[String]) -> Result<()> {
    let config = load_config(common)?;
    let mut out = Outputs::new(&common.out_dir)?;
    let schema = load_schema(common)?;
    let table = preprocess::load_table(&common.input, schema.as_ref())?;
    let cleaned = if table.is_complete() { table.clone() } else { table.impute()? };

    let columns = table
        .columns()
        .iter()
        .zip(cleaned.columns())
        .map(|(raw, clean)| {
            let (stat, p, note) = match ks_normality_test(&clean.series) {
                Ok(ks) => (Some(ks.statistic), Some(ks.p_value), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            ColumnReport {
                name: raw.name.clone(),
                role: raw.role,
                missing: raw.series.missing_count(),
                ks_statistic: stat,
                ks_p_value: p,
                note,
            }
        })
        .collect();
    let report = PrepReport {
        seed: config.forest.seed,
        rows: table.n_rows(),
        missing_cells: table.missing_cells(),
        total_cells: table.total_cells(),
        missing_rate: table.missing_rate(),
        columns,
    };
    out.write_with("cleaned.csv", |buf| preprocess::write_table(&cleaned, buf))?;
    out.write_json("prep_report.json", &report)?;
    out.finish("prep", config.forest.seed, argv)
}

pub fn correlate(common: &Common, argv: &[String]) -> Result<()> {
    let config = load_config(common)?;
    let mut out = Outputs::new(&common.out_dir)?;
    let mut warnings = Vec::new();
    let table = load_complete(common, &mut warnings)?;
    let matrix = analysis::spearman_matrix(&table)?;
    for c in matrix.constant_columns() {
        warnings.push(format!("column `{c}` is constant; its correlations are undefined"));
    }
    print_warnings(&warnings);
    out.write_with("correlation.csv", |buf| matrix.write_csv(buf))?;
    out.finish("correlate", config.forest.seed, argv)
}

/// Target column plus the indicator columns used to explain it.
fn split_target<'a>(table: &'a FeatureTable, target: &str) -> Result<(&'a Column, Vec<&'a Column>)> {
    let col = table
        .column(target)
        .ok_or_else(|| Error::UnknownColumn(target.to_string()))?;
    let features: Vec<&Column> = table.indicators().filter(|c| c.name != target).collect();
    if features.is_empty() {
        return Err(Error::InvalidArgument(format!("no indicator columns to explain `{target}`")).into());
    }
    Ok((col, features))
}

fn feature_rows(features: &[&Column]) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<&[f64]> = features
        .iter()
        .map(|c| c.series.complete_values())
        .collect::<hybrid_forecast::Result<_>>()?;
    let n = cols.first().map_or(0, |c| c.len());
    Ok((0..n).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
}

fn names(features: &[&Column]) -> Vec<String> {
    features.iter().map(|c| c.name.clone()).collect()
}

#[derive(Serialize)]
struct ImportanceTarget {
    target: String,
    importances: Vec<ImportanceRow>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ImportanceReport {
    seed: u64,
    forest: ForestConfig,
    targets: Vec<ImportanceTarget>,
}

pub fn importance(common: &Common, forest: &ForestArgs, target: Option<&str>, argv: &[String]) -> Result<()> {
    let mut config = load_config(common)?;
    apply_forest_args(&mut config.forest, forest);
    let mut out = Outputs::new(&common.out_dir)?;
    let mut warnings = Vec::new();
    let table = load_complete(common, &mut warnings)?;
    print_warnings(&warnings);

    let targets: Vec<String> = match target {
        Some(t) => vec![t.to_string()],
        None => table.targets().map(|c| c.name.clone()).collect(),
    };
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no target column: pass --target or a schema with targets".into()).into());
    }
    let mut report = ImportanceReport {
        seed: config.forest.seed,
        forest: config.forest.clone(),
        targets: Vec::new(),
    };
    for name in &targets {
        let (col, features) = split_target(&table, name)?;
        let x = feature_rows(&features)?;
        let model = fit_forest(&x, col.series.complete_values()?, names(&features), &config.forest)
            .map_err(|e| e.in_stage(format!("forest for `{name}`")))?;
        let rows = model.importance_table()?;
        print_warnings(&model.warnings);
        out.write_with(&format!("importance_{}.csv", file_safe(name)), |buf| {
            write_importance_csv(&rows, buf)
        })?;
        report.targets.push(ImportanceTarget {
            target: name.clone(),
            importances: rows,
            warnings: model.warnings.clone(),
        });
    }
    out.write_json("importance.json", &report)?;
    out.finish("importance", config.forest.seed, argv)
}

pub struct ForecastArgs {
    pub horizon: Option<usize>,
    pub grid_search: bool,
    pub validation_years: Option<usize>,
    pub grid_step: Option<f64>,
    pub alpha: Option<f64>,
    pub holdout: Option<usize>,
}

fn write_holdout_csv(h: &HoldoutReport, buf: &mut Vec<u8>) -> hybrid_forecast::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["target", "model", "mae", "rmse", "r2"])?;
    for t in &h.targets {
        for s in &t.scores {
            w.write_record([
                t.name.clone(),
                s.model.clone(),
                format!("{:.6}", s.mae),
                format!("{:.6}", s.rmse),
                s.r2.map(|v| format!("{v:.6}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn forecast(common: &Common, forest: &ForestArgs, args: &ForecastArgs, argv: &[String]) -> Result<()> {
    let mut config = load_config(common)?;
    apply_forest_args(&mut config.forest, forest);
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    if args.grid_search {
        config.weights = WeightMode::GridSearch;
    }
    if let Some(a) = args.alpha {
        config.weights = WeightMode::Fixed(EnsembleWeights::from_alpha(a)?);
    }
    if let Some(v) = args.validation_years {
        config.validation_years = v;
    }
    if let Some(s) = args.grid_step {
        config.grid_step = s;
    }
    config.validate()?;
    if args.holdout == Some(0) {
        return Err(Error::InvalidArgument("holdout must be at least 1".into()).into());
    }

    let mut out = Outputs::new(&common.out_dir)?;
    let mut input_warnings = Vec::new();
    let table = load_complete(common, &mut input_warnings)?;
    let mut report = pipeline::run_pipeline(&table, &config)?;
    if let Some(k) = args.holdout {
        let (_, holdout) = pipeline::evaluate_holdout(&table, &config, k).map_err(|e| e.in_stage("holdout"))?;
        report.evaluation = Some(holdout);
    }
    input_warnings.append(&mut report.warnings);
    report.warnings = input_warnings;
    print_warnings(&report.warnings);

    let mut json = report.to_json()?;
    json.push('\n');
    out.write("forecast_report.json", json.as_bytes())?;
    out.write_with("forecast.csv", |buf| report.write_csv(buf))?;
    out.write_with("indicator_forecast.csv", |buf| report.write_indicator_csv(buf))?;
    if let Some(h) = &report.evaluation {
        out.write_with("holdout.csv", |buf| write_holdout_csv(h, buf))?;
    }
    out.finish("forecast", config.forest.seed, argv)
}

pub struct SensitivityArgs {
    pub target: Option<String>,
    pub factors: Vec<String>,
    pub delta: f64,
    pub one_sided: bool,
    pub model: ModelKind,
    pub base: BasePoint,
    pub sobol_samples: usize,
    pub range_fraction: f64,
}

#[derive(Serialize)]
struct FactorReport {
    name: String,
    base: f64,
    s: Option<f64>,
    range: Option<(f64, f64)>,
    s1: Option<f64>,
    st: Option<f64>,
    s1_se: Option<f64>,
    st_se: Option<f64>,
}

#[derive(Serialize)]
struct SobolSummary {
    n: usize,
    s1_sum: f64,
    s1_sum_se: f64,
    variance: f64,
}

#[derive(Serialize)]
struct SensitivityReport {
    seed: u64,
    target: String,
    model: &'static str,
    delta: f64,
    sided: Sidedness,
    range_fraction: f64,
    prediction_at_base: f64,
    factors: Vec<FactorReport>,
    sobol: Option<SobolSummary>,
    warnings: Vec<String>,
}

type Model = Box<dyn Fn(&[f64]) -> f64 + Sync>;

fn fit_model(kind: ModelKind, x: &[Vec<f64>], y: &[f64], names: Vec<String>, config: &ForestConfig) -> Result<Model> {
    match kind {
        ModelKind::Forest => {
            let forest = fit_forest(x, y, names, config)?;
            Ok(Box::new(move |row: &[f64]| forest.predict(row).unwrap_or(f64::NAN)))
        }
        ModelKind::Linear => {
            let fit = ols_with_intercept(x, y).map_err(|e| e.in_stage("linear surrogate"))?;
            let b = fit.coefficients;
            Ok(Box::new(move |row: &[f64]| {
                b[0] + row.iter().zip(&b[1..]).map(|(v, c)| v * c).sum::<f64>()
            }))
        }
    }
}

pub fn sensitivity(common: &Common, forest: &ForestArgs, args: &SensitivityArgs, argv: &[String]) -> Result<()> {
    let mut config = load_config(common)?;
    apply_forest_args(&mut config.forest, forest);
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", args.delta)).into());
    }
    let mut out = Outputs::new(&common.out_dir)?;
    let mut warnings = Vec::new();
    let table = load_complete(common, &mut warnings)?;

    let target = match &args.target {
        Some(t) => t.clone(),
        None => {
            let ts: Vec<&Column> = table.targets().collect();
            match ts.as_slice() {
                [one] => one.name.clone(),
                [] => return Err(Error::InvalidArgument("no target column: pass --target".into()).into()),
                _ => {
                    return Err(Error::InvalidArgument("several targets: pick one with --target".into()).into())
                }
            }
        }
    };
    let (col, features) = split_target(&table, &target)?;
    let feature_names = names(&features);
    let x = feature_rows(&features)?;
    let y = col.series.complete_values()?;
    let model = fit_model(args.model, &x, y, feature_names.clone(), &config.forest)?;

    let base: Vec<f64> = match args.base {
        BasePoint::Last => x.last().cloned().unwrap_or_default(),
        BasePoint::Mean => (0..features.len())
            .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / x.len() as f64)
            .collect(),
    };
    let requested: Vec<usize> = if args.factors.is_empty() {
        (0..features.len()).collect()
    } else {
        args.factors
            .iter()
            .map(|f| {
                feature_names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| CliError::from(Error::UnknownColumn(f.clone())))
            })
            .collect::<Result<_>>()?
    };
    let sided = if args.one_sided { Sidedness::OneSided } else { Sidedness::TwoSided };

    let mut factors: Vec<FactorReport> = feature_names
        .iter()
        .zip(&base)
        .map(|(name, &b)| FactorReport {
            name: name.clone(),
            base: b,
            s: None,
            range: None,
            s1: None,
            st: None,
            s1_se: None,
            st_se: None,
        })
        .collect();
    for &i in &requested {
        let s = analysis::single_factor_sensitivity(&*model, &base, i, args.delta, sided)
            .map_err(|e| e.in_stage(format!("sensitivity of `{}`", feature_names[i])))?;
        factors[i].s = Some(s);
    }

    let mut sobol = None;
    if args.sobol_samples > 0 {
        if features.len() < 2 {
            warnings.push("Sobol indices need at least two factors; skipped".into());
        } else {
            let ranges = analysis::ranges_around(&base, args.range_fraction);
            let res = analysis::sobol_indices(&*model, &ranges, args.sobol_samples, config.forest.seed)
                .map_err(|e| e.in_stage("sobol"))?;
            for ((f, idx), r) in factors.iter_mut().zip(&res.indices).zip(&ranges) {
                f.range = Some(*r);
                f.s1 = Some(idx.s1);
                f.st = Some(idx.st);
                f.s1_se = Some(idx.s1_se);
                f.st_se = Some(idx.st_se);
            }
            sobol = Some(SobolSummary {
                n: res.n,
                s1_sum: res.s1_sum,
                s1_sum_se: res.s1_sum_se,
                variance: res.variance,
            });
        }
    }
    print_warnings(&warnings);

    let report = SensitivityReport {
        seed: config.forest.seed,
        target,
        model: match args.model {
            ModelKind::Forest => "forest",
            ModelKind::Linear => "linear",
        },
        delta: args.delta,
        sided,
        range_fraction: args.range_fraction,
        prediction_at_base: model(&base),
        factors,
        sobol,
        warnings,
    };
    out.write_json("sensitivity.json", &report)?;
    out.finish("sensitivity", config.forest.seed, argv)
}

/// Years and values of the chosen column of a headed CSV file.
fn read_values(path: &Path, column: Option<&str>) -> Result<(Vec<i64>, Vec<f64>)> {
    let table = preprocess::load_table(path, None)?;
    let col = match column {
        Some(name) => table
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?,
        None => match table.columns() {
            [one] => one,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} has several value columns: pick one with --column",
                    path.display()
                ))
                .into())
            }
        },
    };
    let values = col
        .series
        .complete_values()
        .map_err(|e| e.in_stage(path.display().to_string()))?;
    Ok((table.years().to_vec(), values.to_vec()))
}

#[derive(Serialize)]
struct ModelMetrics {
    model: String,
    mae: f64,
    rmse: f64,
    r2: f64,
}

#[derive(Serialize)]
struct EvaluationReport {
    seed: u64,
    n: usize,
    models: Vec<ModelMetrics>,
}

pub fn evaluate(common: &Common, predicted: &[PathBuf], column: Option<&str>, argv: &[String]) -> Result<()> {
    let config = load_config(common)?;
    let mut out = Outputs::new(&common.out_dir)?;
    let (years, actual) = read_values(&common.input, column)?;
    let mut models = Vec::new();
    for path in predicted {
        let (p_years, p) = read_values(path, column)?;
        if p.len() != actual.len() {
            return Err(Error::LengthMismatch(actual.len(), p.len()).into());
        }
        if p_years != years {
            return Err(Error::InvalidArgument(format!("{} covers different years than the actuals", path.display())).into());
        }
        let m = analysis::evaluate(&actual, &p).map_err(|e| e.in_stage(path.display().to_string()))?;
        models.push(ModelMetrics {
            model: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            mae: m.mae,
            rmse: m.rmse,
            r2: m.r2,
        });
    }
    if models.len() > 1 {
        out.write_with("comparison.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["model", "mae", "rmse", "r2"])?;
            for m in &models {
                w.write_record([
                    m.model.clone(),
                    format!("{:.6}", m.mae),
                    format!("{:.6}", m.rmse),
                    format!("{:.6}", m.r2),
                ])?;
            }
            w.flush().map_err(|e| Error::Csv(e.into()))
        })?;
    }
    let report = EvaluationReport {
        seed: config.forest.seed,
        n: actual.len(),
        models,
    };
    out.write_json("metrics.json", &report)?;
    out.finish("evaluate", config.forest.seed, argv)
}
