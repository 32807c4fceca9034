//! Maximum-likelihood recovery of the marginal causal odds ratio.
//!
//! With true exposure `T`, outcome `Y` and reported exposure `T*`, the
//! observed-data likelihood is built from
//!
//! ```text
//! P(Y=y, T*=t* | x) = Σ_t r(t* | y, t) · P(Y=y | T=t, x) · P(T=t | x)
//! ```
//!
//! where `r` is the reporting mechanism. Writing `m_t = P(Y=1 | T=t, x)` and
//! `e = P(T=1 | x)`, over-reporting (`r(1|y,1) = 1`, `r(1|y,0) = η_y`) gives
//!
//! ```text
//! P(1,1) = m₁e + η₁m₀(1-e)          P(1,0) = (1-η₁)m₀(1-e)
//! P(0,1) = (1-m₁)e + η₀(1-m₀)(1-e)  P(0,0) = (1-η₀)(1-m₀)(1-e)
//! ```
//!
//! and under-reporting (`r(0|y,1) = ζ_y`, `r(0|y,0) = 1`) gives
//!
//! ```text
//! P(1,1) = (1-ζ₁)m₁e                P(1,0) = ζ₁m₁e + m₀(1-e)
//! P(0,1) = (1-ζ₀)(1-m₁)e            P(0,0) = ζ₀(1-m₁)e + (1-m₀)(1-e)
//! ```
//!
//! In both cases the four cells sum to `e + (1-e) = 1`.

use std::collections::HashMap;

use crate::data::{BiasDirection, CaseControlData, EstimateResult, Method, RecallBias};
use crate::error::{Error, Result};
use crate::glm::fit_logistic;
use crate::linalg::{dot, Matrix};
use crate::optim::{minimize_bfgs, BfgsOptions};
use crate::scalar::{expit, lit, to_f64, Real};

/// Outcome-model parameterisation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeModel {
    /// `m(T, x) = expit(γ₀ + γ_t T + γ_xᵀx)`.
    #[default]
    Shared,
    /// Independent coefficient vectors for `m₀` and `m₁`.
    Separate,
}

/// Exposure and outcome model coefficients.
///
/// `beta = [β₀, β_x…]`. With [`OutcomeModel::Shared`], `gamma = [γ₀, γ_t, γ_x…]`;
/// with [`OutcomeModel::Separate`], `gamma = [γ₀₀, γ₀ₓ…, γ₁₀, γ₁ₓ…]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlParams<F> {
    pub beta: Vec<F>,
    pub gamma: Vec<F>,
    pub outcome_model: OutcomeModel,
}

impl<F: Real> MlParams<F> {
    pub fn zeros(p: usize, outcome_model: OutcomeModel) -> Self {
        let g = match outcome_model {
            OutcomeModel::Shared => p + 2,
            OutcomeModel::Separate => 2 * (p + 1),
        };
        Self {
            beta: vec![F::zero(); p + 1],
            gamma: vec![F::zero(); g],
            outcome_model,
        }
    }

    pub fn covariate_dim(&self) -> usize {
        self.beta.len() - 1
    }

    fn to_vec(&self) -> Vec<F> {
        self.beta.iter().chain(&self.gamma).copied().collect()
    }

    fn from_slice(theta: &[F], p: usize, outcome_model: OutcomeModel) -> Self {
        Self {
            beta: theta[..p + 1].to_vec(),
            gamma: theta[p + 1..].to_vec(),
            outcome_model,
        }
    }

    /// `e(x) = P(T=1 | x)`.
    pub fn exposure_prob(&self, x: &[F]) -> F {
        expit(self.beta[0] + dot(&self.beta[1..], x))
    }

    /// `m_t(x) = P(Y=1 | T=t, x)`.
    pub fn outcome_prob(&self, t: bool, x: &[F]) -> F {
        expit(self.outcome_predictor(t, x))
    }

    fn outcome_predictor(&self, t: bool, x: &[F]) -> F {
        let p = self.covariate_dim();
        match self.outcome_model {
            OutcomeModel::Shared => {
                let t_term = if t { self.gamma[1] } else { F::zero() };
                self.gamma[0] + t_term + dot(&self.gamma[2..], x)
            }
            OutcomeModel::Separate => {
                let g = if t { &self.gamma[p + 1..] } else { &self.gamma[..p + 1] };
                g[0] + dot(&g[1..], x)
            }
        }
    }

    /// Exposure coefficient `γ_t` of the shared outcome model.
    pub fn exposure_effect(&self) -> Option<F> {
        match self.outcome_model {
            OutcomeModel::Shared => Some(self.gamma[1]),
            OutcomeModel::Separate => None,
        }
    }
}

/// `r(t* | y, t)`: probability of reporting `t_star` given outcome and true exposure.
fn report_prob<F: Real>(bias: &RecallBias<F>, y: bool, t: bool, t_star: bool) -> F {
    let theta = if y { bias.theta_case } else { bias.theta_control };
    let p_report_exposed = match (bias.direction, t) {
        (BiasDirection::None, t) => {
            if t {
                F::one()
            } else {
                F::zero()
            }
        }
        (BiasDirection::OverReporting, true) => F::one(),
        (BiasDirection::OverReporting, false) => theta,
        (BiasDirection::UnderReporting, true) => F::one() - theta,
        (BiasDirection::UnderReporting, false) => F::zero(),
    };
    if t_star {
        p_report_exposed
    } else {
        F::one() - p_report_exposed
    }
}

#[inline]
fn bernoulli<F: Real>(p: F, y: bool) -> F {
    if y {
        p
    } else {
        F::one() - p
    }
}

/// `P(Y=y, T*=t* | x)` from the component probabilities.
pub fn cell_prob<F: Real>(y: bool, t_star: bool, m1: F, m0: F, e: F, bias: &RecallBias<F>) -> F {
    report_prob(bias, y, true, t_star) * bernoulli(m1, y) * e
        + report_prob(bias, y, false, t_star) * bernoulli(m0, y) * (F::one() - e)
}

/// `P(Y=y, T*=t_star | X=x)` under the fitted models and recall-bias model.
pub fn joint_prob<F: Real>(
    y: bool,
    t_star: bool,
    x: &[F],
    params: &MlParams<F>,
    bias: &RecallBias<F>,
) -> F {
    let m1 = params.outcome_prob(true, x);
    let m0 = params.outcome_prob(false, x);
    let e = params.exposure_prob(x);
    cell_prob(y, t_star, m1, m0, e, bias)
}

/// Records collapsed to distinct `(y, t*, x)` with multiplicities.
#[derive(Clone, Debug)]
pub(crate) struct Patterns<F> {
    pub y: Vec<bool>,
    pub t_star: Vec<bool>,
    pub x: Matrix<F>,
    pub weight: Vec<F>,
}

impl<F: Real> Patterns<F> {
    pub fn from_data(data: &CaseControlData<F>) -> Self {
        let p = data.p();
        let mut index: HashMap<(bool, bool, Vec<u64>), usize> = HashMap::new();
        let mut y = Vec::new();
        let mut t_star = Vec::new();
        let mut xs: Vec<F> = Vec::new();
        let mut weight: Vec<F> = Vec::new();
        for r in data.records() {
            let key = (r.y, r.t_star, r.x.iter().map(|v| to_f64(v).to_bits()).collect());
            match index.get(&key) {
                Some(&k) => weight[k] = weight[k] + F::one(),
                None => {
                    index.insert(key, y.len());
                    y.push(r.y);
                    t_star.push(r.t_star);
                    xs.extend_from_slice(r.x);
                    weight.push(F::one());
                }
            }
        }
        let rows = y.len();
        Self {
            y,
            t_star,
            x: Matrix::from_row_major(rows, p, xs),
            weight,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn total_weight(&self) -> F {
        self.weight.iter().copied().sum()
    }

    /// Design with `T*` prepended to the covariates.
    fn exposure_design(&self) -> Matrix<F> {
        let p = self.x.cols();
        let mut data = Vec::with_capacity(self.len() * (p + 1));
        for i in 0..self.len() {
            data.push(if self.t_star[i] { F::one() } else { F::zero() });
            data.extend_from_slice(self.x.row(i));
        }
        Matrix::from_row_major(self.len(), p + 1, data)
    }
}

/// Negative log-likelihood and its gradient in the flat parameter vector.
fn neg_log_likelihood<F: Real>(
    theta: &[F],
    grad: &mut [F],
    pats: &Patterns<F>,
    bias: &RecallBias<F>,
    model: OutcomeModel,
) -> Option<F> {
    let p = pats.x.cols();
    let params = MlParams::from_slice(theta, p, model);
    let nb = p + 1;
    grad.iter_mut().for_each(|g| *g = F::zero());
    let mut nll = F::zero();
    for i in 0..pats.len() {
        let x = pats.x.row(i);
        let (y, ts, w) = (pats.y[i], pats.t_star[i], pats.weight[i]);
        let e = params.exposure_prob(x);
        let m1 = params.outcome_prob(true, x);
        let m0 = params.outcome_prob(false, x);
        let prob = cell_prob(y, ts, m1, m0, e, bias);
        if !(prob > F::zero()) || !prob.is_finite() {
            return None;
        }
        nll = nll - w * prob.ln();

        let sign = if y { F::one() } else { -F::one() };
        let r1 = report_prob(bias, y, true, ts);
        let r0 = report_prob(bias, y, false, ts);
        let dp_dm1 = r1 * e * sign;
        let dp_dm0 = r0 * (F::one() - e) * sign;
        let dp_de = r1 * bernoulli(m1, y) - r0 * bernoulli(m0, y);
        let scale = -w / prob;

        let ge = scale * dp_de * e * (F::one() - e);
        grad[0] = grad[0] + ge;
        for j in 0..p {
            grad[1 + j] = grad[1 + j] + ge * x[j];
        }
        let g1 = scale * dp_dm1 * m1 * (F::one() - m1);
        let g0 = scale * dp_dm0 * m0 * (F::one() - m0);
        let gamma = &mut grad[nb..];
        match model {
            OutcomeModel::Shared => {
                gamma[0] = gamma[0] + g1 + g0;
                gamma[1] = gamma[1] + g1;
                for j in 0..p {
                    gamma[2 + j] = gamma[2 + j] + (g1 + g0) * x[j];
                }
            }
            OutcomeModel::Separate => {
                gamma[0] = gamma[0] + g0;
                gamma[nb] = gamma[nb] + g1;
                for j in 0..p {
                    gamma[1 + j] = gamma[1 + j] + g0 * x[j];
                    gamma[nb + 1 + j] = gamma[nb + 1 + j] + g1 * x[j];
                }
            }
        }
    }
    Some(nll)
}

/// Observed-data log-likelihood `Σ log P(Y, T* | X)` and its gradient.
pub fn log_likelihood<F: Real>(
    data: &CaseControlData<F>,
    params: &MlParams<F>,
    bias: &RecallBias<F>,
) -> Option<(F, Vec<F>)> {
    let pats = Patterns::from_data(data);
    let theta = params.to_vec();
    let mut grad = vec![F::zero(); theta.len()];
    let nll = neg_log_likelihood(&theta, &mut grad, &pats, bias, params.outcome_model)?;
    Some((-nll, grad.into_iter().map(|g| -g).collect()))
}

#[derive(Clone, Copy, Debug)]
pub struct MlOptions<F> {
    pub outcome_model: OutcomeModel,
    /// Gradient sup-norm tolerance on the summed log-likelihood. `None` picks
    /// `max(1e-6, 100·ε·n)`.
    pub grad_tol: Option<F>,
    pub max_iter: usize,
}

impl<F> Default for MlOptions<F> {
    fn default() -> Self {
        Self {
            outcome_model: OutcomeModel::Shared,
            grad_tol: None,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MlFit<F> {
    pub params: MlParams<F>,
    pub log_likelihood: F,
    pub iterations: usize,
    pub grad_sup_norm: F,
    pub starts_converged: usize,
}

pub fn fit_ml<F: Real>(data: &CaseControlData<F>, bias: &RecallBias<F>) -> Result<MlFit<F>> {
    fit_ml_with(data, bias, &MlOptions::default())
}

/// Maximises the observed-data likelihood from three starting points (zeros,
/// a warm start from naive logistic fits that treat `T*` as `T`, and a
/// perturbed warm start) and keeps the best converged optimum.
pub fn fit_ml_with<F: Real>(
    data: &CaseControlData<F>,
    bias: &RecallBias<F>,
    opts: &MlOptions<F>,
) -> Result<MlFit<F>> {
    data.require_both_outcomes()?;
    let n_exposed = data.exposures().iter().filter(|&&t| t).count();
    if n_exposed == 0 || n_exposed == data.n() {
        return Err(Error::DegenerateInput("reported exposure is constant".into()));
    }
    let pats = Patterns::from_data(data);
    let p = data.p();
    let model = opts.outcome_model;
    let n = pats.total_weight();
    let grad_tol = opts
        .grad_tol
        .unwrap_or_else(|| lit::<F>(1e-6).max(lit::<F>(100.0) * F::epsilon() * n));

    let mut starts = vec![MlParams::zeros(p, model).to_vec()];
    if let Some(warm) = warm_start(&pats, model) {
        let perturbed = warm
            .iter()
            .enumerate()
            .map(|(k, &v)| v + if k % 2 == 0 { lit(0.1) } else { lit(-0.1) })
            .collect();
        starts.push(warm);
        starts.push(perturbed);
    }

    let bfgs = BfgsOptions {
        grad_tol,
        max_iter: opts.max_iter,
    };
    let mut best: Option<(Vec<F>, F, usize, F)> = None;
    let mut converged = 0;
    let mut iterations = 0;
    for x0 in starts {
        let obj = |theta: &[F], g: &mut [F]| neg_log_likelihood(theta, g, &pats, bias, model);
        let Some(m) = minimize_bfgs(obj, x0, bfgs) else {
            continue;
        };
        iterations += m.iterations;
        if !m.converged {
            continue;
        }
        converged += 1;
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((m.x, m.value, m.iterations, m.grad_sup_norm));
        }
    }
    let Some((theta, nll, _, gnorm)) = best else {
        return Err(Error::NonConvergence(format!(
            "no start reached gradient tolerance after {iterations} iterations"
        )));
    };
    let params = MlParams::from_slice(&theta, p, model);
    for i in 0..pats.len() {
        let prob = joint_prob(pats.y[i], pats.t_star[i], pats.x.row(i), &params, bias);
        if !(prob > F::min_positive_value()) {
            return Err(Error::DegenerateLikelihood);
        }
    }
    Ok(MlFit {
        params,
        log_likelihood: -nll,
        iterations,
        grad_sup_norm: gnorm,
        starts_converged: converged,
    })
}

/// Naive fits: `T* ~ X` for the exposure model and `Y ~ T* + X` for the outcome model.
fn warm_start<F: Real>(pats: &Patterns<F>, model: OutcomeModel) -> Option<Vec<F>> {
    let exp_fit = fit_logistic(&pats.x, &pats.t_star, Some(&pats.weight)).ok()?;
    let out_fit = fit_logistic(&pats.exposure_design(), &pats.y, Some(&pats.weight)).ok()?;
    if !exp_fit.converged || !out_fit.converged {
        return None;
    }
    let mut theta = exp_fit.coefficients.clone();
    let c = &out_fit.coefficients;
    match model {
        OutcomeModel::Shared => theta.extend_from_slice(c),
        OutcomeModel::Separate => {
            theta.push(c[0]);
            theta.extend_from_slice(&c[2..]);
            theta.push(c[0] + c[1]);
            theta.extend_from_slice(&c[2..]);
        }
    }
    Some(theta)
}

/// Averages `m̂₁(x)` and `m̂₀(x)` over the sample: `(p̂₁, p̂₀)`.
pub fn g_computation<F: Real>(data: &CaseControlData<F>, params: &MlParams<F>) -> (F, F) {
    let n = lit::<F>(data.n() as f64);
    let (s1, s0) = data.records().fold((F::zero(), F::zero()), |(s1, s0), r| {
        (
            s1 + params.outcome_prob(true, r.x),
            s0 + params.outcome_prob(false, r.x),
        )
    });
    (s1 / n, s0 / n)
}

/// Log odds ratio of two probabilities, `log[p₁(1-p₀)] - log[p₀(1-p₁)]`.
pub fn log_odds_ratio<F: Real>(p1: F, p0: F) -> Result<F> {
    let inside = |p: F| p > F::zero() && p < F::one();
    if !inside(p1) || !inside(p0) {
        return Err(Error::DegenerateMarginal {
            p1: to_f64(&p1),
            p0: to_f64(&p0),
        });
    }
    Ok((p1 * (F::one() - p0)).ln() - (p0 * (F::one() - p1)).ln())
}

pub fn ml_marginal_cor<F: Real>(
    data: &CaseControlData<F>,
    bias: &RecallBias<F>,
) -> Result<EstimateResult> {
    ml_marginal_cor_with(data, bias, &MlOptions::default())
}

pub fn ml_marginal_cor_with<F: Real>(
    data: &CaseControlData<F>,
    bias: &RecallBias<F>,
    opts: &MlOptions<F>,
) -> Result<EstimateResult> {
    let fit = fit_ml_with(data, bias, opts)?;
    let (p1, p0) = g_computation(data, &fit.params);
    let log_psi = log_odds_ratio(p1, p0)?;
    let mut res = EstimateResult::point(Method::ML, to_f64(&log_psi), bias.to_f64())
        .with_diag("iterations", fit.iterations as f64)
        .with_diag("log_likelihood", to_f64(&fit.log_likelihood))
        .with_diag("grad_sup_norm", to_f64(&fit.grad_sup_norm))
        .with_diag("starts_converged", fit.starts_converged as f64)
        .with_diag("p1", to_f64(&p1))
        .with_diag("p0", to_f64(&p0));
    if let Some(gt) = fit.params.exposure_effect() {
        res = res.with_diag("gamma_t", to_f64(&gt));
    }
    Ok(res)
}
