//! Simulation harness: the balanced four-covariate design with over-reported
//! exposure, the null design used for significance-flip curves, and a
//! survey-like generator for end-to-end smoke data.
//!
//! Replicate `r` of a scenario with seed `s` draws from stream `r` of `s`,
//! so reports do not depend on thread scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{BiasDirection, CaseControlData, Method, RecallBias};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorSpec};
use crate::scalar::expit;
use crate::seeds::stream_rng;
use crate::sensitivity::normal_quantile;
use crate::strata::quantile_sorted;
use crate::Dataset;

/// Main-effect exposure coefficients `(β₀, β₁, β₂, β₃, β₄)` of the design.
pub const DESIGN_BETA: [f64; 5] = [-1.0, 1.0, -1.0, 1.0, 0.0];
/// Main-effect outcome coefficients `(γ₀, γ₁, γ₂, γ₃, γ₄)` of the design.
pub const DESIGN_GAMMA: [f64; 5] = [-2.0, 2.0, -2.0, 0.0, 1.0];
/// `X₁X₂` interaction used when a model is misspecified.
pub const EXPOSURE_INTERACTION: f64 = 2.0;
pub const OUTCOME_INTERACTION: f64 = -2.0;

/// True log marginal CORs used for correctly specified outcome models.
pub const TARGETS_COR_OUTCOME: [f64; 3] = [0.0, 0.357, 0.706];
/// True log marginal CORs used for misspecified outcome models.
pub const TARGETS_MIS_OUTCOME: [f64; 3] = [0.0, 0.310, 0.607];

const CELLS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationScenario {
    pub name: String,
    /// Sample size, a multiple of 16.
    pub n: usize,
    /// `(β₀, β₁, β₂, β₃, β₄, β₁₂)`.
    pub beta: [f64; 6],
    /// `(γ₀, γ₁, γ₂, γ₃, γ₄, γ₁₂)`.
    pub gamma: [f64; 6],
    pub gamma_t: f64,
    /// Over-reporting bias injected into the reported exposure.
    pub bias: RecallBias<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

/// Specification status of the exposure and outcome models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Preset {
    pub exposure_misspecified: bool,
    pub outcome_misspecified: bool,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::new(false, false),
        Preset::new(true, false),
        Preset::new(false, true),
        Preset::new(true, true),
    ];

    pub const fn new(exposure_misspecified: bool, outcome_misspecified: bool) -> Self {
        Self {
            exposure_misspecified,
            outcome_misspecified,
        }
    }

    pub fn beta(self) -> [f64; 6] {
        let b = DESIGN_BETA;
        let b12 = if self.exposure_misspecified { EXPOSURE_INTERACTION } else { 0.0 };
        [b[0], b[1], b[2], b[3], b[4], b12]
    }

    pub fn gamma(self) -> [f64; 6] {
        let g = DESIGN_GAMMA;
        let g12 = if self.outcome_misspecified { OUTCOME_INTERACTION } else { 0.0 };
        [g[0], g[1], g[2], g[3], g[4], g12]
    }

    /// True log marginal CORs paired with this preset.
    pub fn targets(self) -> [f64; 3] {
        if self.outcome_misspecified {
            TARGETS_MIS_OUTCOME
        } else {
            TARGETS_COR_OUTCOME
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |m: bool| if m { "mis" } else { "cor" };
        write!(f, "({},{})", s(self.exposure_misspecified), s(self.outcome_misspecified))
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace() && *c != '(' && *c != ')').collect();
        let parse = |p: &str| match p {
            "cor" => Ok(false),
            "mis" => Ok(true),
            _ => Err(Error::InvalidInput(format!("unknown preset {s:?}"))),
        };
        match t.split_once(',') {
            Some((e, o)) => Ok(Preset::new(parse(e)?, parse(o)?)),
            None => Err(Error::InvalidInput(format!("unknown preset {s:?}"))),
        }
    }
}

impl SimulationScenario {
    /// A design scenario whose exposure effect is solved so that the true log
    /// marginal COR equals `target_log_cor`.
    pub fn preset(preset: Preset, n: usize, target_log_cor: f64, bias: RecallBias<f64>, n_reps: usize, seed: u64) -> Result<Self> {
        let gamma = preset.gamma();
        let s = Self {
            name: preset.to_string(),
            n,
            beta: preset.beta(),
            gamma,
            gamma_t: solve_gamma_t(&gamma, target_log_cor)?,
            bias,
            n_reps,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(CELLS) {
            return Err(Error::InvalidInput(format!("n = {} is not a positive multiple of 16", self.n)));
        }
        if self.bias.direction == BiasDirection::UnderReporting {
            return Err(Error::InvalidBias("simulated recall bias is over-reporting".into()));
        }
        if !self.gamma_t.is_finite() || self.beta.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn true_log_cor(&self) -> f64 {
        true_log_marginal_cor(&self.gamma, self.gamma_t)
    }
}

/// Covariates `(X₁, X₂, X₃, X₄)` of balanced-grid cell `k`.
pub fn grid_cell(k: usize) -> [f64; 4] {
    [(k >> 3) & 1, (k >> 2) & 1, (k >> 1) & 1, k & 1].map(|b| b as f64)
}

fn linear(c: &[f64; 6], x: &[f64; 4]) -> f64 {
    c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2] + c[4] * x[3] + c[5] * x[0] * x[1]
}

/// `P(T=1 | x)` under the exposure model.
pub fn exposure_prob(beta: &[f64; 6], x: &[f64; 4]) -> f64 {
    expit(linear(beta, x))
}

/// `P(Y(t)=1 | x)`.
pub fn outcome_prob(gamma: &[f64; 6], gamma_t: f64, t: bool, x: &[f64; 4]) -> f64 {
    expit(linear(gamma, x) + if t { gamma_t } else { 0.0 })
}

/// Log marginal COR of the population: probabilities averaged over the
/// balanced grid, then combined into an odds ratio.
pub fn true_log_marginal_cor(gamma: &[f64; 6], gamma_t: f64) -> f64 {
    let avg = |t| (0..CELLS).map(|k| outcome_prob(gamma, gamma_t, t, &grid_cell(k))).sum::<f64>() / CELLS as f64;
    let (p1, p0) = (avg(true), avg(false));
    (p1 / (1.0 - p1)).ln() - (p0 / (1.0 - p0)).ln()
}

/// Exposure effect giving the requested true log marginal COR.
pub fn solve_gamma_t(gamma: &[f64; 6], target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let f = |g: f64| true_log_marginal_cor(gamma, g) - target;
    let (mut lo, mut hi) = if target > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    // the marginal COR is increasing in the exposure effect; widen until bracketed
    for _ in 0..20 {
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            break;
        }
        lo *= 2.0;
        hi *= 2.0;
        if target > 0.0 {
            lo = 0.0;
        } else {
            hi = 0.0;
        }
    }
    if !(f(lo) <= 0.0 && f(hi) >= 0.0) {
        return Err(Error::InvalidInput(format!("target log COR {target} is unreachable")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One simulated dataset with its latent quantities.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    /// Outcome, reported exposure and the four main-effect covariates.
    pub data: Dataset,
    pub t: Vec<bool>,
    pub y0: Vec<bool>,
    pub y1: Vec<bool>,
    pub true_log_cor: f64,
}

/// Replicate `rep` of a scenario. Each record draws, in order, `T`, `Y(0)`,
/// `Y(1)` and the two recall-bias indicators, so the stream position of every
/// draw is fixed.
pub fn simulate_dataset(scenario: &SimulationScenario, rep: u64) -> Result<SimulatedData> {
    scenario.validate()?;
    let n = scenario.n;
    let per_cell = n / CELLS;
    let mut rng = stream_rng(scenario.seed, rep);
    let bernoulli = |rng: &mut ChaCha8Rng, p: f64| rng.random::<f64>() < p;
    let (eta1, eta0) = match scenario.bias.direction {
        BiasDirection::OverReporting => (scenario.bias.theta_case, scenario.bias.theta_control),
        _ => (0.0, 0.0),
    };
    let mut x = Vec::with_capacity(n * 4);
    let (mut t, mut y0, mut y1, mut y, mut t_star) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let cell = grid_cell(i / per_cell);
        let ti = bernoulli(&mut rng, exposure_prob(&scenario.beta, &cell));
        let y0i = bernoulli(&mut rng, outcome_prob(&scenario.gamma, scenario.gamma_t, false, &cell));
        let y1i = bernoulli(&mut rng, outcome_prob(&scenario.gamma, scenario.gamma_t, true, &cell));
        let rb1 = bernoulli(&mut rng, eta1);
        let rb0 = bernoulli(&mut rng, eta0);
        let yi = if ti { y1i } else { y0i };
        x.extend_from_slice(&cell);
        t.push(ti);
        y0.push(y0i);
        y1.push(y1i);
        y.push(yi);
        t_star.push(ti || (yi && rb1) || (!yi && rb0));
    }
    let names = (1..=4).map(|j| format!("x{j}")).collect();
    let data = CaseControlData::from_flat(y, t_star, x, 4, None)?.with_covariate_names(names)?;
    Ok(SimulatedData {
        data,
        t,
        y0,
        y1,
        true_log_cor: scenario.true_log_cor(),
    })
}

/// Column label of a method in study reports.
pub fn report_column(method: Method) -> &'static str {
    match method {
        Method::Crude => "crude",
        Method::ML => "ml",
        Method::StratPropensity => "s_prop",
        Method::StratPrognostic => "s_prog",
        Method::MantelHaenszel => "mh",
    }
}

/// Methods reported by default, in column order.
pub const STUDY_METHODS: [Method; 4] = [
    Method::Crude,
    Method::ML,
    Method::StratPropensity,
    Method::StratPrognostic,
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean `log ψ̂` over replicates where the method succeeded.
    pub mean_log_psi: Option<f64>,
    /// Monte Carlo standard error of the mean.
    pub mc_se: Option<f64>,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub scenario: SimulationScenario,
    pub true_log_cor: f64,
    pub methods: Vec<MethodSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub rows: Vec<ScenarioSummary>,
}

impl StudyReport {
    pub fn summary(&self, row: usize, method: Method) -> Option<&MethodSummary> {
        self.rows[row].methods.iter().find(|m| m.method == method)
    }

    /// One row per scenario: name, size, truth and one mean per method.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let Some(first) = self.rows.first() else {
            w.write_record(["scenario", "n", "true"])?;
            return flush(w);
        };
        let mut header = vec!["scenario".to_string(), "n".into(), "true".into()];
        header.extend(first.methods.iter().map(|m| report_column(m.method).to_string()));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.scenario.name.clone(), r.scenario.n.to_string(), format!("{:.6}", r.true_log_cor)];
            rec.extend(r.methods.iter().map(|m| m.mean_log_psi.map(|v| format!("{v:.6}")).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        flush(w)
    }
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Io {
        path: "<report output>".into(),
        source: e,
    })
}

/// Bias each method is evaluated under: the crude estimator ignores recall
/// bias, every other method corrects for the scenario's bias.
fn method_bias(method: Method, scenario: &SimulationScenario) -> RecallBias<f64> {
    match method {
        Method::Crude => RecallBias::none(),
        _ => scenario.bias.clone(),
    }
}

/// Runs every scenario for `scenario.n_reps` replicates. Crude is always
/// included as the first column.
pub fn run_study(scenarios: &[SimulationScenario], methods: &[Method]) -> Result<StudyReport> {
    let mut cols = vec![Method::Crude];
    cols.extend(methods.iter().copied().filter(|&m| m != Method::Crude));
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        sc.validate()?;
        let per_rep: Vec<Vec<Option<f64>>> = (0..sc.n_reps as u64)
            .into_par_iter()
            .map(|rep| {
                let Ok(sim) = simulate_dataset(sc, rep) else {
                    return vec![None; cols.len()];
                };
                cols.iter()
                    .map(|&m| {
                        estimate(&sim.data, &EstimatorSpec::new(m), &method_bias(m, sc))
                            .ok()
                            .map(|r| r.log_psi)
                            .filter(|v| v.is_finite())
                    })
                    .collect()
            })
            .collect();
        let methods = cols
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                let vals: Vec<f64> = per_rep.iter().filter_map(|r| r[j]).collect();
                let k = vals.len() as f64;
                let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / k);
                let mc_se = mean.filter(|_| vals.len() > 1).map(|mu| {
                    (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
                });
                MethodSummary {
                    method: m,
                    mean_log_psi: mean,
                    mc_se,
                    successes: vals.len(),
                    failures: sc.n_reps - vals.len(),
                }
            })
            .collect();
        rows.push(ScenarioSummary {
            true_log_cor: sc.true_log_cor(),
            scenario: sc.clone(),
            methods,
        });
    }
    Ok(StudyReport { rows })
}

/// The full replication matrix: each preset at each of its three targets.
pub fn standard_scenarios(presets: &[Preset], n: usize, n_reps: usize, seed: u64) -> Result<Vec<SimulationScenario>> {
    let bias = RecallBias::over_reporting(0.1, 0.1)?;
    let mut out = Vec::new();
    for &p in presets {
        for target in p.targets() {
            out.push(SimulationScenario::preset(p, n, target, bias.clone(), n_reps, seed)?);
        }
    }
    Ok(out)
}

/// Null design for significance-flip curves: `T ~ Bern(p_t)`, `Y(0), Y(1) ~
/// Bern(p_y)` independently, no covariates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NullDesign {
    pub n: usize,
    pub p_exposure: f64,
    pub p_outcome: f64,
}

impl Default for NullDesign {
    fn default() -> Self {
        Self {
            n: 2000,
            p_exposure: 0.3,
            p_outcome: 0.25,
        }
    }
}

/// Latent draws of one null-design replicate, reusable across bias levels.
#[derive(Clone, Debug)]
pub struct NullDraws {
    pub t: Vec<bool>,
    pub y: Vec<bool>,
    u_case: Vec<f64>,
    u_control: Vec<f64>,
}

impl NullDraws {
    pub fn draw(design: &NullDesign, seed: u64, rep: u64) -> Self {
        let mut rng = stream_rng(seed, rep);
        let n = design.n;
        let (mut t, mut y, mut u_case, mut u_control) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let ti = rng.random::<f64>() < design.p_exposure;
            let y0 = rng.random::<f64>() < design.p_outcome;
            let y1 = rng.random::<f64>() < design.p_outcome;
            t.push(ti);
            y.push(if ti { y1 } else { y0 });
            u_case.push(rng.random::<f64>());
            u_control.push(rng.random::<f64>());
        }
        Self { t, y, u_case, u_control }
    }

    /// Reported exposure under over-reporting `(η₀, η₁)`. The same uniforms
    /// drive every bias level, so misreports are nested as `η` grows.
    pub fn dataset(&self, eta0: f64, eta1: f64) -> Result<Dataset> {
        let t_star = (0..self.t.len())
            .map(|i| {
                let u = if self.y[i] { (self.u_case[i], eta1) } else { (self.u_control[i], eta0) };
                self.t[i] || u.0 < u.1
            })
            .collect();
        CaseControlData::from_flat(self.y.clone(), t_star, vec![], 0, None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullSweepPoint {
    pub eta1: f64,
    /// Mean naive `log ψ̂*` over replicates.
    pub mean_log_psi: f64,
    /// Mean Woolf interval endpoints on the `ψ` scale (averaged on the log scale).
    pub ci_low: f64,
    pub ci_high: f64,
    /// Share of replicates whose interval excludes 1.
    pub rejection_rate: f64,
    pub replicates: usize,
}

/// Naive odds ratio of `T*` against `Y` on null-design data as `η₁` grows
/// with `η₀ = 0`. Intervals are Woolf intervals at `level`.
pub fn null_sweep(design: &NullDesign, eta1_grid: &[f64], n_reps: usize, seed: u64, level: f64) -> Result<Vec<NullSweepPoint>> {
    if eta1_grid.iter().any(|v| !(0.0..1.0).contains(v)) {
        return Err(Error::InvalidBias("eta1 values must lie in [0,1)".into()));
    }
    let z = normal_quantile(level);
    let per_rep: Vec<Vec<Option<(f64, f64)>>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let draws = NullDraws::draw(design, seed, rep);
            eta1_grid
                .iter()
                .map(|&e| draws.dataset(0.0, e).ok().and_then(|d| woolf(&d)))
                .collect()
        })
        .collect();
    Ok(eta1_grid
        .iter()
        .enumerate()
        .map(|(j, &eta1)| {
            let vals: Vec<(f64, f64)> = per_rep.iter().filter_map(|r| r[j]).collect();
            let k = vals.len().max(1) as f64;
            let mean = vals.iter().map(|v| v.0).sum::<f64>() / k;
            let lo = vals.iter().map(|v| v.0 - z * v.1).sum::<f64>() / k;
            let hi = vals.iter().map(|v| v.0 + z * v.1).sum::<f64>() / k;
            let rej = vals.iter().filter(|v| (v.0 - z * v.1) > 0.0 || (v.0 + z * v.1) < 0.0).count();
            NullSweepPoint {
                eta1,
                mean_log_psi: mean,
                ci_low: lo.exp(),
                ci_high: hi.exp(),
                rejection_rate: rej as f64 / k,
                replicates: vals.len(),
            }
        })
        .collect())
}

/// `(log OR, SE)` of the pooled table, `None` with a zero cell.
fn woolf(d: &Dataset) -> Option<(f64, f64)> {
    let t = d.pooled_table();
    if t.has_zero_cell() {
        return None;
    }
    let [a, b, c, dd] = t.cells::<f64>(false);
    Some(((a * dd / (b * c)).ln(), (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / dd).sqrt()))
}

/// Survey-like data: seven covariates (four binary, three continuous), a
/// case definition at the 90th percentile of a continuous score, and
/// under-reported exposure with `(ζ₀, ζ₁)`.
pub fn simulate_survey_like(n: usize, zeta0: f64, zeta1: f64, seed: u64) -> Result<Dataset> {
    if n < 20 {
        return Err(Error::InvalidInput("need at least 20 records".into()));
    }
    RecallBias::under_reporting(zeta0, zeta1)?;
    let mut rng = stream_rng(seed, 0);
    let mut normal = || -> f64 {
        // Box-Muller
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..10).map(|_| normal()).collect();
        let x = [
            (z[0] > 0.0) as u8 as f64,
            (z[1] > 0.5) as u8 as f64,
            (z[2] > -0.3) as u8 as f64,
            (z[3] > 1.0) as u8 as f64,
            (z[4] * 10.0).round() / 10.0,
            ((z[5] + 0.5 * z[4]) * 10.0).round() / 10.0,
            (2.0 + z[6]).round().clamp(0.0, 4.0),
        ];
        let lp = -0.9 + 0.6 * x[0] - 0.4 * x[1] + 0.3 * x[2] + 0.5 * x[3] + 0.3 * x[4] - 0.2 * x[5] + 0.1 * x[6];
        let t = z[7] < inv_expit_quantile(lp);
        let score = 0.5 * t as u8 as f64 + 0.4 * x[0] + 0.3 * x[3] + 0.35 * x[4] + 0.2 * x[5] - 0.15 * x[6] + 1.5 * z[8];
        rows.push((x, t, score, z[9]));
    }
    let mut sorted: Vec<f64> = rows.iter().map(|r| r.2).collect();
    sorted.sort_by(f64::total_cmp);
    let cut = quantile_sorted(&sorted, 0.9);
    let mut y = Vec::with_capacity(n);
    let mut t_star = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n * 7);
    for (x, t, score, u) in rows {
        let yi = score >= cut;
        let zeta = if yi { zeta1 } else { zeta0 };
        // uniform from the spare normal draw via its CDF
        let miss = statrs_cdf(u) < zeta;
        y.push(yi);
        t_star.push(t && !miss);
        xs.extend_from_slice(&x);
    }
    let names = (1..=7).map(|j| format!("x{j}")).collect();
    CaseControlData::from_flat(y, t_star, xs, 7, None)?.with_covariate_names(names)
}

/// Normal quantile of `expit(lp)`, so `Z < q` has probability `expit(lp)`.
fn inv_expit_quantile(lp: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(expit(lp))
}

fn statrs_cdf(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(z)
}

/// Parses scenario blocks: `key = value` lines, blocks separated by blank
/// lines, `#` starts a comment.
///
/// Keys: `name`, `preset` (`(cor,cor)` etc.), `n`, `beta` and `gamma` (six
/// comma-separated values each), `gamma_t` or `target_log_cor`,
/// `over_report` (`η₀,η₁`), `n_reps`, `seed`.
pub fn parse_scenarios(text: &str, default_seed: u64) -> Result<Vec<SimulationScenario>> {
    let mut out = Vec::new();
    let mut block: Vec<(usize, String, String)> = Vec::new();
    let lines = text.lines().chain(std::iter::once(""));
    for (i, raw) in lines.enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !block.is_empty() {
                out.push(scenario_from_block(&block, default_seed)?);
                block.clear();
            }
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Scenario {
            line: i + 1,
            message: "expected key = value".into(),
        })?;
        block.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    if out.is_empty() {
        return Err(Error::Scenario {
            line: 0,
            message: "no scenarios defined".into(),
        });
    }
    Ok(out)
}

fn scenario_from_block(block: &[(usize, String, String)], default_seed: u64) -> Result<SimulationScenario> {
    let err = |line: usize, message: String| Error::Scenario { line, message };
    let num = |line: usize, v: &str| v.parse::<f64>().map_err(|_| err(line, format!("bad number {v:?}")));
    let six = |line: usize, v: &str| -> Result<[f64; 6]> {
        let vals = v.split(',').map(|s| num(line, s.trim())).collect::<Result<Vec<_>>>()?;
        vals.try_into().map_err(|_| err(line, "expected six comma-separated values".into()))
    };
    let first = block[0].0;
    let mut name = None;
    let mut preset: Option<Preset> = None;
    let mut n = 2000usize;
    let (mut beta, mut gamma) = (None, None);
    let (mut gamma_t, mut target) = (None, None);
    let mut bias = RecallBias::none();
    let mut n_reps = 2000usize;
    let mut seed = default_seed;
    for (line, k, v) in block {
        let line = *line;
        match k.as_str() {
            "name" => name = Some(v.clone()),
            "preset" => preset = Some(v.parse().map_err(|e: Error| err(line, e.to_string()))?),
            "n" => n = v.parse().map_err(|_| err(line, format!("bad sample size {v:?}")))?,
            "beta" => beta = Some(six(line, v)?),
            "gamma" => gamma = Some(six(line, v)?),
            "gamma_t" => gamma_t = Some(num(line, v)?),
            "target_log_cor" => target = Some(num(line, v)?),
            "over_report" => {
                let (a, b) = v.split_once(',').ok_or_else(|| err(line, "expected eta0,eta1".into()))?;
                bias = RecallBias::over_reporting(num(line, a.trim())?, num(line, b.trim())?)
                    .map_err(|e| err(line, e.to_string()))?;
            }
            "n_reps" => n_reps = v.parse().map_err(|_| err(line, format!("bad replicate count {v:?}")))?,
            "seed" => seed = v.parse().map_err(|_| err(line, format!("bad seed {v:?}")))?,
            other => return Err(err(line, format!("unknown key {other:?}"))),
        }
    }
    let beta = beta.or(preset.map(Preset::beta)).ok_or_else(|| err(first, "beta or preset required".into()))?;
    let gamma = gamma.or(preset.map(Preset::gamma)).ok_or_else(|| err(first, "gamma or preset required".into()))?;
    let gamma_t = match (gamma_t, target) {
        (Some(_), Some(_)) => return Err(err(first, "give gamma_t or target_log_cor, not both".into())),
        (Some(g), None) => g,
        (None, Some(t)) => solve_gamma_t(&gamma, t).map_err(|e| err(first, e.to_string()))?,
        (None, None) => 0.0,
    };
    let name = name.or(preset.map(|p| p.to_string())).unwrap_or_else(|| "scenario".into());
    let s = SimulationScenario {
        name,
        n,
        beta,
        gamma,
        gamma_t,
        bias,
        n_reps,
        seed,
    };
    s.validate().map_err(|e| err(first, e.to_string()))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(preset: Preset, target: f64, bias: RecallBias<f64>) -> SimulationScenario {
        SimulationScenario::preset(preset, 160, target, bias, 4, 11).unwrap()
    }

    #[test]
    fn first_cell_exposure_probability() {
        let p = exposure_prob(&Preset::new(false, false).beta(), &grid_cell(0));
        assert!((p - 0.268_941_421).abs() < 1e-8);
    }

    #[test]
    fn solved_effects_hit_targets() {
        for p in Preset::ALL {
            for target in p.targets() {
                let g = solve_gamma_t(&p.gamma(), target).unwrap();
                assert!((true_log_marginal_cor(&p.gamma(), g) - target).abs() < 1e-9);
                assert!(target == 0.0 || target < g);
            }
        }
        assert_eq!(true_log_marginal_cor(&DESIGN_GAMMA_6, 0.0), 0.0);
    }

    const DESIGN_GAMMA_6: [f64; 6] = [-2.0, 2.0, -2.0, 0.0, 1.0, 0.0];

    #[test]
    fn no_bias_reports_truth() {
        let s = scenario(Preset::new(false, false), 0.357, RecallBias::none());
        let sim = simulate_dataset(&s, 0).unwrap();
        assert_eq!(sim.data.exposures(), &sim.t[..]);
    }

    #[test]
    fn balanced_grid() {
        let s = scenario(Preset::new(true, true), 0.0, RecallBias::over_reporting(0.1, 0.1).unwrap());
        let sim = simulate_dataset(&s, 1).unwrap();
        let mut counts = [0usize; 16];
        for i in 0..sim.data.n() {
            let x = sim.data.x(i);
            let k = x.iter().fold(0, |acc, &v| acc * 2 + v as usize);
            counts[k] += 1;
        }
        assert!(counts.iter().all(|&c| c == 10));
    }

    #[test]
    fn over_reporting_only_adds_exposure() {
        let s = scenario(Preset::new(false, false), 0.0, RecallBias::over_reporting(0.3, 0.5).unwrap());
        let sim = simulate_dataset(&s, 2).unwrap();
        for i in 0..sim.data.n() {
            assert!(!sim.t[i] || sim.data.t_star(i));
        }
    }

    #[test]
    fn n_must_be_multiple_of_16() {
        let mut s = scenario(Preset::new(false, false), 0.0, RecallBias::none());
        s.n = 100;
        assert!(simulate_dataset(&s, 0).is_err());
    }

    #[test]
    fn parses_scenario_file() {
        let text = "# table row\nname = a\npreset = (cor,cor)\nn = 800\ntarget_log_cor = 0.357\nover_report = 0.1,0.1\nn_reps = 10\n\n\
                    name = b\nbeta = -1,1,-1,1,0,2\ngamma = -2,2,-2,0,1,-2\ngamma_t = 0.5\nseed = 3\n";
        let s = parse_scenarios(text, 7).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].n, 800);
        assert_eq!(s[0].seed, 7);
        assert!((s[0].true_log_cor() - 0.357).abs() < 1e-9);
        assert_eq!(s[1].beta[5], 2.0);
        assert_eq!(s[1].seed, 3);
        assert!(matches!(parse_scenarios("n = 2000\nfoo = 1\n", 0), Err(Error::Scenario { line: 2, .. })));
    }

    #[test]
    fn null_draws_nest_over_eta() {
        let d = NullDraws::draw(&NullDesign { n: 400, ..NullDesign::default() }, 5, 0);
        let a = d.dataset(0.0, 0.1).unwrap();
        let b = d.dataset(0.0, 0.3).unwrap();
        for i in 0..400 {
            assert!(!a.t_star(i) || b.t_star(i));
        }
        assert_eq!(d.dataset(0.0, 0.0).unwrap().exposures(), &d.t[..]);
    }

    #[test]
    fn survey_like_shape() {
        let d = simulate_survey_like(1000, 0.2, 0.2, 1).unwrap();
        assert_eq!(d.p(), 7);
        let share = d.n_cases() as f64 / 1000.0;
        assert!((share - 0.1).abs() < 0.01, "{share}");
    }
}
