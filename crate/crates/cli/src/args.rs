use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Superconductor critical temperature toolkit.
#[derive(Parser, Debug)]
#[command(name = "supercon", version, about, long_about = None)]
#[command(after_help = "EXAMPLES:\n  \
    supercon parse Ba0.2La1.8CuO4\n  \
    supercon clean --input raw.csv --out clean.csv --audit audit.csv\n  \
    supercon featurize --input clean.csv --out features.csv\n  \
    supercon train --data features.csv --model gbt --preset paper-best --out model.json\n  \
    supercon predict --model model.json --train clean.csv --verbose MgB2")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every random draw (subsampling, holdout shuffles)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Suppress progress and informational messages on stderr
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// Output style for tabular results
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Element property table to use instead of the built-in one
    #[arg(long, global = true, env = "SUPERCON_ELEMENTS")]
    pub elements: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse formulas and print their canonical composition
    Parse {
        #[arg(required = true)]
        formulas: Vec<String>,
    },
    /// Inspect the element property table
    Elements {
        #[command(subcommand)]
        action: ElementsAction,
    },
    /// Compute the 81 composition features
    Featurize(FeaturizeArgs),
    /// Clean a raw material,critical_temp CSV and write an audit log
    Clean(CleanArgs),
    /// Fit a model on a features CSV
    Train(TrainArgs),
    /// Estimate out-of-sample error by repeated 2/3 - 1/3 holdout
    Eval(EvalArgs),
    /// Score a grid of boosting parameters on one fixed split
    Grid(GridArgs),
    /// Descriptive statistics of critical temperatures by group
    Summarize(SummarizeArgs),
    /// Predict the critical temperature of formulas
    Predict(PredictArgs),
    /// Gain-based feature importance of a boosted model
    Importance(ImportanceArgs),
}

#[derive(Subcommand, Debug)]
pub enum ElementsAction {
    /// Print the table, or selected rows
    Show {
        symbols: Vec<String>,
        /// Also print the table version and per-column sources
        #[arg(long)]
        provenance: bool,
    },
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    /// Formulas to featurize
    #[arg(conflicts_with = "input")]
    pub formulas: Vec<String>,
    /// Clean CSV with material and critical_temp columns
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Output features CSV (stdout when omitted)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CleanArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Per-row audit log CSV
    #[arg(long)]
    pub audit: PathBuf,
    /// Rows with critical_temp above this are dropped, in K
    #[arg(long, default_value_t = supercon_core::dataprep::DEFAULT_TC_CEILING)]
    pub tc_ceiling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Gbt,
    Ols,
}

/// Boosting parameters; each flag overrides the chosen preset.
#[derive(Args, Debug, Clone)]
pub struct GbtArgs {
    /// Starting parameter set: `default` or `paper-best`
    #[arg(long, default_value = "default")]
    pub preset: String,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_child_weight: Option<f64>,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub colsample: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub trees: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Features CSV with a critical_temp column
    #[arg(long, short)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Gbt)]
    pub model: ModelKind,
    #[command(flatten)]
    pub gbt: GbtArgs,
    /// Model file to write
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, short)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Gbt)]
    pub model: ModelKind,
    #[command(flatten)]
    pub gbt: GbtArgs,
    #[arg(long, default_value_t = supercon_core::eval::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// Write the full report as JSON
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write observed vs predicted values of the first repeat's test set
    #[arg(long)]
    pub residuals: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// TOML grid description
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long, short)]
    pub data: PathBuf,
    /// Write every cell's rmse-by-tree-count curve as CSV
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Print only the best N rows
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    /// Clean CSV with material and critical_temp columns
    #[arg(long, short)]
    pub data: PathBuf,
    /// overall, element, cuprate, or contains=<Symbol>
    #[arg(long, default_value = "overall")]
    pub group: String,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Formulas to predict
    #[arg(required_unless_present = "batch", conflicts_with = "batch")]
    pub formulas: Vec<String>,
    #[arg(long, short)]
    pub model: PathBuf,
    /// List training entries with similar compositions
    #[arg(long, short, requires = "train")]
    pub verbose: bool,
    /// Clean training CSV used for the similarity lookup
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Minimum cosine similarity for a listed match
    #[arg(long, default_value_t = supercon_core::predict::DEFAULT_SIMILARITY_THRESHOLD)]
    pub threshold: f64,
    /// CSV with a material column; writes material,predicted_tc,error
    #[arg(long, requires = "out")]
    pub batch: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// Number of features to list
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}
