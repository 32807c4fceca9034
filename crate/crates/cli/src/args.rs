use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use recallcor::estimator::DEFAULT_STRATA;
use recallcor::{BiasDirection, CsvSchema, Method, OutcomeModel, RecallBias};
use recallcor::sensitivity::{grid_axis, IntervalKind, VariedParameter};
use recallcor::strata::PrognosticFit;

use crate::commands::CliError;

/// Marginal causal odds ratios from case-control data with recall bias.
#[derive(Debug, Parser)]
#[command(name = "recallcor", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the marginal COR at one bias setting.
    Estimate(EstimateArgs),
    /// Evaluate an estimator over a grid of bias parameters.
    Sensitivity(SensitivityArgs),
    /// Smallest bias that flips the significance of the estimate.
    Rfactor(RfactorArgs),
    /// Run simulation scenarios and report mean estimates.
    Simulate(SimulateArgs),
    /// Check which way recall bias moves the odds ratio.
    CheckConditions(CheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub outcome_col: String,
    #[arg(long, default_value = "t_star")]
    pub exposure_col: String,
    /// Comma-separated covariate columns; default is every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long)]
    pub stratum_col: Option<String>,
}

impl DataArgs {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            outcome: self.outcome_col.clone(),
            exposure: self.exposure_col.clone(),
            covariates: self.covariates.clone(),
            stratum: self.stratum_col.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Crude,
    Ml,
    StratPropensity,
    StratPrognostic,
    Mh,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Crude => Method::Crude,
            MethodArg::Ml => Method::ML,
            MethodArg::StratPropensity => Method::StratPropensity,
            MethodArg::StratPrognostic => Method::StratPrognostic,
            MethodArg::Mh => Method::MantelHaenszel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeModelArg {
    Shared,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrognosticFitArg {
    Auto,
    FullData,
    ReportedUnexposed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "strat-prognostic")]
    pub method: MethodArg,
    /// Number of score strata.
    #[arg(long = "strata", default_value_t = DEFAULT_STRATA)]
    pub n_strata: usize,
    #[arg(long, value_enum, default_value = "shared")]
    pub outcome_model: OutcomeModelArg,
    #[arg(long, value_enum, default_value = "auto")]
    pub prognostic_fit: PrognosticFitArg,
    /// Add 0.5 to every cell of tables with a zero cell.
    #[arg(long)]
    pub continuity: bool,
}

impl EstimatorArgs {
    pub fn spec(&self, has_labels: bool) -> recallcor::EstimatorSpec {
        let mut spec = recallcor::EstimatorSpec::new(self.method.into());
        spec.n_strata = self.n_strata;
        spec.outcome_model = match self.outcome_model {
            OutcomeModelArg::Shared => OutcomeModel::Shared,
            OutcomeModelArg::Separate => OutcomeModel::Separate,
        };
        spec.prognostic_fit = match self.prognostic_fit {
            PrognosticFitArg::Auto => PrognosticFit::Auto,
            PrognosticFitArg::FullData => PrognosticFit::FullData,
            PrognosticFitArg::ReportedUnexposed => PrognosticFit::ReportedUnexposed,
        };
        spec.continuity_correction = self.continuity;
        if has_labels {
            spec.mh_strata = recallcor::ScoreKind::UserProvided;
        }
        spec
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BiasArgs {
    /// Over-reporting probabilities `eta0,eta1` (controls, cases).
    #[arg(long, value_name = "ETA0,ETA1", conflicts_with = "under_report")]
    pub over_report: Option<String>,
    /// Under-reporting probabilities `zeta0,zeta1` (controls, cases).
    #[arg(long, value_name = "ZETA0,ZETA1")]
    pub under_report: Option<String>,
    /// `none` for no correction (the default).
    #[arg(long, value_parser = ["none"], conflicts_with_all = ["over_report", "under_report"])]
    pub bias: Option<String>,
}

impl BiasArgs {
    pub fn resolve(&self) -> Result<RecallBias<f64>, CliError> {
        match (&self.over_report, &self.under_report) {
            (Some(v), _) => {
                let (a, b) = parse_pair(v)?;
                Ok(RecallBias::over_reporting(a, b)?)
            }
            (_, Some(v)) => {
                let (a, b) = parse_pair(v)?;
                Ok(RecallBias::under_reporting(a, b)?)
            }
            _ => Ok(RecallBias::none()),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BootArgs {
    /// Bootstrap resamples; 0 skips the interval.
    #[arg(long, default_value_t = 500)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Master seed; required whenever resampling is requested.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Percentile instead of normal-theory intervals.
    #[arg(long)]
    pub percentile: bool,
}

impl BootArgs {
    pub fn interval(&self) -> IntervalKind {
        if self.percentile {
            IntervalKind::Percentile
        } else {
            IntervalKind::Normal
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        match self.seed {
            Some(s) => Ok(s),
            None if self.boot == 0 => Ok(0),
            None => Err(CliError::validation("--seed is required when --boot is positive")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    Over,
    Under,
}

impl From<DirectionArg> for BiasDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Over => BiasDirection::OverReporting,
            DirectionArg::Under => BiasDirection::UnderReporting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VaryArg {
    Case,
    Control,
}

impl From<VaryArg> for VariedParameter {
    fn from(v: VaryArg) -> Self {
        match v {
            VaryArg::Case => VariedParameter::Case,
            VaryArg::Control => VariedParameter::Control,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub bias: BiasArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, value_enum)]
    pub direction: DirectionArg,
    /// `lo:hi:step` for both axes, or `lo:hi:step,lo:hi:step` for control then case.
    #[arg(long, default_value = "0:0.5:0.1")]
    pub grid: String,
    /// Only the diagonal where both parameters are equal.
    #[arg(long)]
    pub diagonal: bool,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RfactorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, value_enum)]
    pub direction: DirectionArg,
    /// Parameter to increase.
    #[arg(long, value_enum, default_value = "case")]
    pub vary: VaryArg,
    /// Value of the other parameter.
    #[arg(long, default_value_t = 0.0)]
    pub fixed: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.005)]
    pub scan_step: f64,
    #[arg(long, default_value_t = 500)]
    pub boot: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub percentile: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file of `key = value` blocks.
    #[arg(long, conflicts_with_all = ["preset", "null_sweep"])]
    pub scenarios: Option<PathBuf>,
    /// Built-in design, e.g. `cor,cor` or `mis,mis`; repeatable. Each runs at its three effect sizes.
    #[arg(long)]
    pub preset: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    /// Over-reporting `eta0,eta1` for presets.
    #[arg(long, default_value = "0.1,0.1")]
    pub over_report: String,
    /// Estimators besides the crude one.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ml,strat-propensity,strat-prognostic")]
    pub methods: Vec<MethodArg>,
    /// Null-design curve of the naive odds ratio against the case over-reporting probability.
    #[arg(long)]
    pub null_sweep: bool,
    /// `lo:hi:step` of case over-reporting values for `--null-sweep`.
    #[arg(long, default_value = "0:0.5:0.01")]
    pub eta1_grid: String,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bias: BiasArgs,
    /// Known range `min,max` of the conditional odds ratio, for the marginal check.
    #[arg(long, value_name = "MIN,MAX")]
    pub psi_range: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::validation(format!("expected two comma-separated numbers, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::validation(format!("bad range {s:?}; expected lo:hi:step")))?;
    match nums[..] {
        [lo, hi, step] => Ok(grid_axis(lo, hi, step)?),
        _ => Err(CliError::validation(format!("bad range {s:?}; expected lo:hi:step"))),
    }
}

/// `(control axis, case axis)`.
pub fn parse_grid(s: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    match s.split_once(',') {
        Some((a, b)) => Ok((parse_range(a)?, parse_range(b)?)),
        None => {
            let axis = parse_range(s)?;
            Ok((axis.clone(), axis))
        }
    }
}
