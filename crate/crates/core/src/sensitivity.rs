//! Bootstrap intervals, sensitivity grids over the bias parameters and the
//! R-factor: the smallest bias that flips the significance of an estimate.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{BiasDirection, EstimateResult, RecallBias};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorSpec};
use crate::seeds::{derive_seed, stream_rng, TAG_GRID_CELL};
use crate::strata::quantile_sorted;
use crate::Dataset;

/// Largest tolerated share of failed bootstrap resamples.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    /// `exp(log ψ̂ ± z·SE)`.
    #[default]
    Normal,
    /// Empirical quantiles of the bootstrap `log ψ̂`.
    Percentile,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BootstrapOptions {
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
    pub interval: IntervalKind,
}

impl BootstrapOptions {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        Self {
            n_boot,
            level: 0.95,
            seed,
            interval: IntervalKind::Normal,
        }
    }
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self::new(500, 0)
    }
}

/// Two-sided normal critical value for `level`.
pub fn normal_quantile(level: f64) -> f64 {
    let std = Normal::standard();
    std.inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// Point estimate plus bootstrap SE and CI for one method at one bias value.
/// Every resample reruns the whole pipeline, score fitting included.
pub fn bootstrap_ci(
    data: &Dataset,
    spec: &EstimatorSpec,
    bias: &RecallBias<f64>,
    opts: &BootstrapOptions,
) -> Result<EstimateResult> {
    let point = estimate(data, spec, bias)?;
    bootstrap_statistic(data, point, opts, |d| estimate(d, spec, bias).map(|r| r.log_psi))
}

/// Attaches bootstrap uncertainty to `point` using an arbitrary statistic
/// returning `log ψ̂` for a resample.
pub fn bootstrap_statistic<S>(
    data: &Dataset,
    point: EstimateResult,
    opts: &BootstrapOptions,
    statistic: S,
) -> Result<EstimateResult>
where
    S: Fn(&Dataset) -> Result<f64> + Sync,
{
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0,1), got {}", opts.level)));
    }
    if opts.n_boot == 0 {
        return Ok(point);
    }
    let n = data.n();
    let draws: Vec<Option<f64>> = (0..opts.n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(opts.seed, b);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            statistic(&data.select(&idx)).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut values: Vec<f64> = draws.into_iter().flatten().collect();
    let failed = opts.n_boot - values.len();
    if failed as f64 > MAX_FAILED_FRACTION * opts.n_boot as f64 {
        return Err(Error::TooManyFailedResamples {
            failed,
            total: opts.n_boot,
        });
    }
    let se = sample_sd(&values);
    let (lo, hi) = match opts.interval {
        IntervalKind::Normal => {
            let z = normal_quantile(opts.level);
            (point.log_psi - z * se, point.log_psi + z * se)
        }
        IntervalKind::Percentile => {
            values.sort_by(f64::total_cmp);
            let tail = (1.0 - opts.level) / 2.0;
            let lo = quantile_sorted(&values, tail).min(point.log_psi);
            let hi = quantile_sorted(&values, 1.0 - tail).max(point.log_psi);
            (lo, hi)
        }
    };
    let mut out = point
        .with_diag("n_boot", opts.n_boot as f64)
        .with_diag("failed_resamples", failed as f64);
    out.se_log_psi = Some(se);
    out.ci_low = Some(lo.exp());
    out.ci_high = Some(hi.exp());
    Ok(out)
}

/// Sample standard deviation, shifted by the first value so constant input
/// gives exactly zero.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.len() as f64;
    let shift = values[0];
    let (s1, s2) = values
        .iter()
        .fold((0.0, 0.0), |(a, b), v| (a + (v - shift), b + (v - shift).powi(2)));
    ((s2 - s1 * s1 / m) / (m - 1.0)).max(0.0).sqrt()
}

/// Values `lo, lo+step, …` up to `hi` inclusive (to rounding).
pub fn grid_axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("bad grid {lo}:{hi}:{step}")));
    }
    let k = ((hi - lo) / step + 1e-9).floor() as usize;
    // rounding to 12 decimals keeps axis labels like 0.3 exact in output
    Ok((0..=k)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    /// Control-bias values.
    pub axis0: Vec<f64>,
    /// Case-bias values.
    pub axis1: Vec<f64>,
    /// Only evaluate the diagonal `θ₀ = θ₁` over `axis0`.
    pub constrained_equal: bool,
}

impl GridSpec {
    pub fn full(axis0: Vec<f64>, axis1: Vec<f64>) -> Self {
        Self {
            axis0,
            axis1,
            constrained_equal: false,
        }
    }

    pub fn diagonal(values: Vec<f64>) -> Self {
        Self {
            axis1: values.clone(),
            axis0: values,
            constrained_equal: true,
        }
    }

    /// `(control, case)` pairs in output order: control-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        if self.constrained_equal {
            self.axis0.iter().map(|&v| (v, v)).collect()
        } else {
            self.axis0
                .iter()
                .flat_map(|&c| self.axis1.iter().map(move |&t| (c, t)))
                .collect()
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        if self.constrained_equal {
            (1, self.axis0.len())
        } else {
            (self.axis0.len(), self.axis1.len())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellOutcome {
    Estimate(EstimateResult),
    /// Corrected counts would be negative somewhere.
    Infeasible,
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub control: f64,
    pub case: f64,
    pub outcome: CellOutcome,
}

impl GridCell {
    pub fn estimate(&self) -> Option<&EstimateResult> {
        match &self.outcome {
            CellOutcome::Estimate(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityGrid {
    pub direction: BiasDirection,
    pub axis0: Vec<f64>,
    pub axis1: Vec<f64>,
    pub constrained_equal: bool,
    /// Row-major over `shape()`.
    pub cells: Vec<GridCell>,
}

impl SensitivityGrid {
    pub fn shape(&self) -> (usize, usize) {
        if self.constrained_equal {
            (1, self.axis0.len())
        } else {
            (self.axis0.len(), self.axis1.len())
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        let (_, cols) = self.shape();
        &self.cells[row * cols + col]
    }

    pub fn n_infeasible(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Infeasible))
            .count()
    }

    pub fn n_failed(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Failed { .. }))
            .count()
    }

    /// Long format, one row per cell. Empty fields for cells without an estimate.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let sym = self.direction.symbol();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            format!("{sym}0"),
            format!("{sym}1"),
            "psi".into(),
            "log_psi".into(),
            "ci_low".into(),
            "ci_high".into(),
            "feasible".into(),
        ])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.cells {
            let feasible = !matches!(c.outcome, CellOutcome::Infeasible);
            let est = c.estimate();
            w.write_record([
                c.control.to_string(),
                c.case.to_string(),
                opt(est.map(|r| r.psi())),
                opt(est.map(|r| r.log_psi)),
                opt(est.and_then(|r| r.ci_low)),
                opt(est.and_then(|r| r.ci_high)),
                feasible.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<grid output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Bootstrap seed for grid cell `index`.
pub fn grid_cell_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, TAG_GRID_CELL, index as u64)
}

/// Evaluates the estimator with a bootstrap CI at every grid point. Cells are
/// independent; each redraws its resamples from its own derived seed.
pub fn sensitivity_scan(
    data: &Dataset,
    spec: &EstimatorSpec,
    direction: BiasDirection,
    grid: &GridSpec,
    boot: &BootstrapOptions,
) -> Result<SensitivityGrid> {
    if direction == BiasDirection::None {
        return Err(Error::InvalidBias("a sensitivity scan needs a bias direction".into()));
    }
    let in_range = |v: &f64| (0.0..1.0).contains(v);
    if !grid.axis0.iter().all(in_range) || !grid.axis1.iter().all(in_range) {
        return Err(Error::InvalidBias("grid values must lie in [0,1)".into()));
    }
    let cells = grid
        .points()
        .into_iter()
        .enumerate()
        .map(|(i, (control, case))| {
            let opts = BootstrapOptions {
                seed: grid_cell_seed(boot.seed, i),
                ..*boot
            };
            GridCell {
                control,
                case,
                outcome: evaluate_cell(data, spec, direction, control, case, &opts),
            }
        })
        .collect();
    Ok(SensitivityGrid {
        direction,
        axis0: grid.axis0.clone(),
        axis1: if grid.constrained_equal {
            grid.axis0.clone()
        } else {
            grid.axis1.clone()
        },
        constrained_equal: grid.constrained_equal,
        cells,
    })
}

fn evaluate_cell(
    data: &Dataset,
    spec: &EstimatorSpec,
    direction: BiasDirection,
    control: f64,
    case: f64,
    opts: &BootstrapOptions,
) -> CellOutcome {
    let bias = match RecallBias::new(direction, control, case) {
        Ok(b) => b,
        Err(e) => return CellOutcome::Failed { reason: e.to_string() },
    };
    if !crate::data::validate_bias_feasibility(data, &bias).is_empty() {
        return CellOutcome::Infeasible;
    }
    match bootstrap_ci(data, spec, &bias, opts) {
        Ok(r) => CellOutcome::Estimate(r),
        Err(Error::InfeasibleBias { .. }) => CellOutcome::Infeasible,
        Err(e) => CellOutcome::Failed { reason: e.to_string() },
    }
}

/// Which bias parameter the R-factor search varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariedParameter {
    Case,
    Control,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RFactorOptions {
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub interval: IntervalKind,
    pub scan_step: f64,
    /// Final bracket width.
    pub resolution: f64,
}

impl RFactorOptions {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        Self {
            alpha: 0.05,
            n_boot,
            seed,
            interval: IntervalKind::Normal,
            scan_step: 0.005,
            resolution: 0.002,
        }
    }

    fn bootstrap(&self) -> BootstrapOptions {
        BootstrapOptions {
            n_boot: self.n_boot,
            level: 1.0 - self.alpha,
            seed: self.seed,
            interval: self.interval,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RFactorStatus {
    Found,
    NotFound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RFactorResult {
    pub status: RFactorStatus,
    pub value: Option<f64>,
    pub direction: BiasDirection,
    pub varied: VariedParameter,
    pub fixed_other: f64,
    pub alpha: f64,
    pub initial_significant: bool,
    /// Final `(last unchanged, first flipped)` bracket.
    pub bracket: Option<(f64, f64)>,
    /// Largest parameter value evaluated during the upward scan.
    pub scanned_to: f64,
    /// Upper end of the admissible range for the varied parameter.
    pub feasibility_bound: f64,
    pub evaluations: usize,
}

/// Largest value of the varied parameter keeping every stratum-label table
/// feasible.
pub fn varied_bound(data: &Dataset, direction: BiasDirection, varied: VariedParameter) -> f64 {
    data.label_tables()
        .iter()
        .map(|(_, t)| {
            let (case, control) = t.feasibility_bounds(direction);
            match varied {
                VariedParameter::Case => case,
                VariedParameter::Control => control,
            }
        })
        .fold(1.0, f64::min)
}

/// Smallest value of one bias parameter, the other held at `fixed_other`, at
/// which the CI's exclusion of 1 changes from its zero-bias status.
///
/// Every evaluation reuses the same resampling plan, so the search compares
/// intervals that differ only through the bias parameter.
pub fn r_factor(
    data: &Dataset,
    spec: &EstimatorSpec,
    direction: BiasDirection,
    varied: VariedParameter,
    fixed_other: f64,
    opts: &RFactorOptions,
) -> Result<RFactorResult> {
    if direction == BiasDirection::None {
        return Err(Error::InvalidBias("the R-factor needs a bias direction".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) || !(opts.scan_step > 0.0) || !(opts.resolution > 0.0) {
        return Err(Error::InvalidInput("alpha, scan_step and resolution must be positive".into()));
    }
    let boot = opts.bootstrap();
    let bias_at = |v: f64| match varied {
        VariedParameter::Case => RecallBias::new(direction, fixed_other, v),
        VariedParameter::Control => RecallBias::new(direction, v, fixed_other),
    };
    let mut evaluations = 0usize;
    let mut significant = |v: f64| -> Result<bool> {
        evaluations += 1;
        let r = bootstrap_ci(data, spec, &bias_at(v)?, &boot)?;
        Ok(r.excludes_null().unwrap_or(false))
    };

    let initial = significant(0.0)?;
    let bound = varied_bound(data, direction, varied).min(1.0);
    let mut prev = 0.0;
    let mut bracket = None;
    let mut k = 1u64;
    loop {
        let v = ((k as f64 * opts.scan_step) * 1e12).round() / 1e12;
        if v >= bound {
            break;
        }
        match significant(v) {
            Ok(s) if s != initial => {
                bracket = Some((prev, v));
                break;
            }
            Ok(_) => prev = v,
            // the estimator stops working before the bound: end of the usable range
            Err(_) => break,
        }
        k += 1;
    }
    let scanned_to = bracket.map_or(prev, |(_, hi)| hi);
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(RFactorResult {
            status: RFactorStatus::NotFound,
            value: None,
            direction,
            varied,
            fixed_other,
            alpha: opts.alpha,
            initial_significant: initial,
            bracket: None,
            scanned_to,
            feasibility_bound: bound,
            evaluations,
        });
    };
    while hi - lo > opts.resolution {
        let mid = 0.5 * (lo + hi);
        match significant(mid) {
            Ok(s) if s == initial => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(RFactorResult {
        status: RFactorStatus::Found,
        value: Some(0.5 * (lo + hi)),
        direction,
        varied,
        fixed_other,
        alpha: opts.alpha,
        initial_significant: initial,
        bracket: Some((lo, hi)),
        scanned_to,
        feasibility_bound: bound,
        evaluations,
    })
}
