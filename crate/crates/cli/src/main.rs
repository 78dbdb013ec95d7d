//! `hybrid-forecast`: batch front end for the ARIMA / random forest /
//! Holt-Winters forecasting toolkit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_forecast::ErrorKind;

use crate::commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "hybrid-forecast", version, about = "Hybrid ARIMA-RF-HW forecasting over yearly CSV tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input CSV: `year` first, then numeric columns; empty cells are missing.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON schema listing `indicators` and `targets`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// RNG seed; overrides the forest seed from --config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for all outputs (created if absent).
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON pipeline settings; absent fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Impute gaps and report missing rate and per-column KS normality.
    Prep {
        #[command(flatten)]
        common: Common,
    },
    /// Spearman correlation matrix over every column.
    Correlate {
        #[command(flatten)]
        common: Common,
    },
    /// Random-forest feature importances per target.
    Importance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        forest: ForestArgs,
        /// Target column; defaults to every schema target.
        #[arg(long)]
        target: Option<String>,
    },
    /// Indicator forecasts and weighted RF/HW target forecasts.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        forest: ForestArgs,
        /// Years to forecast.
        #[arg(long)]
        horizon: Option<usize>,
        /// Choose ensemble weights on a trailing validation window.
        #[arg(long)]
        grid_search: bool,
        /// Validation window length for --grid-search.
        #[arg(long)]
        validation_years: Option<usize>,
        /// Grid step for --grid-search; must divide 1.
        #[arg(long)]
        grid_step: Option<f64>,
        /// Fixed random-forest weight (Holt-Winters gets 1 - alpha).
        #[arg(long, conflicts_with = "grid_search")]
        alpha: Option<f64>,
        /// Also score ARIMA, RF, HW and the ensemble on this many trailing years.
        #[arg(long)]
        holdout: Option<usize>,
    },
    /// Single-factor elasticities and Sobol indices of a fitted model.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        forest: ForestArgs,
        /// Target column; may be omitted when there is exactly one.
        #[arg(long)]
        target: Option<String>,
        /// Factor to report S for (repeatable); defaults to every indicator.
        #[arg(long)]
        factor: Vec<String>,
        /// Relative perturbation.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Use the +delta response only.
        #[arg(long)]
        one_sided: bool,
        /// Surrogate model mapping indicators to the target.
        #[arg(long, value_enum, default_value_t = ModelKind::Forest)]
        model: ModelKind,
        /// Base point for the perturbations.
        #[arg(long, value_enum, default_value_t = BasePoint::Last)]
        base: BasePoint,
        /// Sobol base sample count (power of two, at least 256); 0 skips Sobol.
        #[arg(long, default_value_t = 1024)]
        sobol_samples: usize,
        /// Sobol ranges are base * (1 -/+ fraction).
        #[arg(long, default_value_t = 0.1)]
        range_fraction: f64,
    },
    /// MAE, RMSE and R² of prediction files against an actuals file (--input).
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Prediction file (repeatable); several give a comparison table.
        #[arg(long, required = true)]
        predicted: Vec<PathBuf>,
        /// Value column; defaults to the only non-year column.
        #[arg(long)]
        column: Option<String>,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct ForestArgs {
    /// Number of trees.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Maximum tree depth.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Features tried per split.
    #[arg(long)]
    pub mtry: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Forest,
    Linear,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasePoint {
    Last,
    Mean,
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    use commands::*;
    match cli.command {
        Command::Prep { common } => prep(&common, &argv),
        Command::Correlate { common } => correlate(&common, &argv),
        Command::Importance { common, forest, target } => importance(&common, &forest, target.as_deref(), &argv),
        Command::Forecast {
            common,
            forest,
            horizon,
            grid_search,
            validation_years,
            grid_step,
            alpha,
            holdout,
        } => forecast(
            &common,
            &forest,
            &ForecastArgs {
                horizon,
                grid_search,
                validation_years,
                grid_step,
                alpha,
                holdout,
            },
            &argv,
        ),
        Command::Sensitivity {
            common,
            forest,
            target,
            factor,
            delta,
            one_sided,
            model,
            base,
            sobol_samples,
            range_fraction,
        } => sensitivity(
            &common,
            &forest,
            &SensitivityArgs {
                target,
                factors: factor,
                delta,
                one_sided,
                model,
                base,
                sobol_samples,
                range_fraction,
            },
            &argv,
        ),
        Command::Evaluate {
            common,
            predicted,
            column,
        } => evaluate(&common, &predicted, column.as_deref(), &argv),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help / --version
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (tag, code) = match e.kind() {
                ErrorKind::Data => ("data", 2),
                ErrorKind::Numerical => ("numerical", 3),
            };
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{tag}]: {msg}");
            ExitCode::from(code)
        }
    }
}
