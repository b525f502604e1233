use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fairclass::optim::{ConstraintSet, Family};
use fairclass::pipeline::{PostProcess, PreProcess};

#[derive(Debug, Parser)]
#[command(name = "fairclass", version, about = "Fairness-aware binary classification")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test pair.
    Generate(GenerateArgs),
    /// Fit on a training CSV and classify a test CSV.
    FitPredict(FitArgs),
    /// Score stored classifications against labelled data.
    Evaluate(EvaluateArgs),
    /// Run the scenario grid and write tidy results.
    Simulate(SimulateArgs),
    /// Recompute every metric of a simulation from its audit directory.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Lr,
    Svm,
    Melr,
    Mesvm,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Lr => Family::Lr,
            FamilyArg::Svm => Family::Svm,
            FamilyArg::Melr => Family::Melr,
            FamilyArg::Mesvm => Family::Mesvm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintArg {
    None,
    Di,
    Fnr,
    Fpr,
    Dm,
}

impl From<ConstraintArg> for ConstraintSet {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::None => ConstraintSet::None,
            ConstraintArg::Di => ConstraintSet::Di,
            ConstraintArg::Fnr => ConstraintSet::Fnr,
            ConstraintArg::Fpr => ConstraintSet::Fpr,
            ConstraintArg::Dm => ConstraintSet::Dm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreArg {
    Id,
    Di,
}

impl From<PreArg> for PreProcess {
    fn from(p: PreArg) -> Self {
        match p {
            PreArg::Id => PreProcess::Id,
            PreArg::Di => PreProcess::Di,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostArg {
    None,
    Di,
    Dm,
    Fpr,
    Fnr,
}

impl From<PostArg> for PostProcess {
    fn from(p: PostArg) -> Self {
        match p {
            PostArg::None => PostProcess::None,
            PostArg::Di => PostProcess::Di,
            PostArg::Dm => PostProcess::Dm,
            PostArg::Fpr => PostProcess::Fpr,
            PostArg::Fnr => PostProcess::Fnr,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "lr")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Training fraction.
    #[arg(long, default_value_t = 0.01)]
    pub split: f64,
    /// Number of groups; implied 100 for the mixed families.
    #[arg(long)]
    pub groups: Option<usize>,
    /// Standard deviation of the group effects.
    #[arg(long, default_value_t = 3.0)]
    pub sigma_g: f64,
    /// Probability that s = 1.
    #[arg(long, default_value_t = 0.5)]
    pub sf_prob: f64,
    /// True coefficients, intercept first and sensitive last (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    /// Label logistic data by p >= 0.5 instead of a Bernoulli draw.
    #[arg(long)]
    pub threshold_labels: bool,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

/// Options of `fit-predict`. Every field may also come from the `--config`
/// TOML file; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitOptions {
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    pub constraint: Option<ConstraintArg>,
    /// Fairness threshold.
    #[arg(long)]
    pub c: Option<f64>,
    /// Hinge weight of the SVM families.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Ridge weight on group effects.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub pre: Option<PreArg>,
    /// Resampling repetitions.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<usize>,
    #[arg(long, value_enum)]
    pub post: Option<PostArg>,
    /// Sensitive features (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub sf: Option<Vec<String>>,
    #[arg(long)]
    pub sfpre: Option<String>,
    #[arg(long)]
    pub sfpost: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-solve time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Allowed relative accuracy loss in the cut-off sweep.
    #[arg(long)]
    pub guard: Option<f64>,
    #[arg(long)]
    pub label_col: Option<String>,
    /// Group column, required by the mixed families.
    #[arg(long)]
    pub group_col: Option<String>,
    /// Also write the solver iteration trace.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
}

impl FitOptions {
    /// Fills every unset field from `base`.
    pub fn or(self, base: FitOptions) -> FitOptions {
        FitOptions {
            family: self.family.or(base.family),
            constraint: self.constraint.or(base.constraint),
            c: self.c.or(base.c),
            mu: self.mu.or(base.mu),
            lambda: self.lambda.or(base.lambda),
            pre: self.pre.or(base.pre),
            r: self.r.or(base.r),
            post: self.post.or(base.post),
            sf: self.sf.or(base.sf),
            sfpre: self.sfpre.or(base.sfpre),
            sfpost: self.sfpost.or(base.sfpost),
            seed: self.seed.or(base.seed),
            time_limit: self.time_limit.or(base.time_limit),
            guard: self.guard.or(base.guard),
            label_col: self.label_col.or(base.label_col),
            group_col: self.group_col.or(base.group_col),
            trace: self.trace.or(base.trace),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// TOML file with any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub options: FitOptions,
    #[arg(long, default_value = "result")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Labelled data.
    #[arg(long)]
    pub data: PathBuf,
    /// Classifications CSV with a `prediction` column, one row per data row.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "y")]
    pub label_col: String,
    #[arg(long, value_delimiter = ',', default_value = "s")]
    pub sf: Vec<String>,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Grid of grouped populations (no pre-processing axis).
    #[arg(long)]
    pub mixed: bool,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub split: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    /// Per-solve time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Only run these scenario ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<usize>>,
    #[arg(long, default_value = "simulation.csv")]
    pub out: PathBuf,
    /// Directory for per-run classifications used by `replay`.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Tidy CSV written by `simulate`.
    #[arg(long)]
    pub results: PathBuf,
    /// Audit directory written by `simulate --audit`.
    #[arg(long)]
    pub audit: PathBuf,
    /// Largest tolerated absolute difference.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}
