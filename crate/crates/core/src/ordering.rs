//! Sufficient and necessary conditions for the direction of the gap between
//! the true causal odds ratio `ψ` and the naive estimand `ψ*` computed from
//! reported exposure.

use serde::Serialize;

use crate::data::{BiasDirection, RecallBias};
use crate::error::{Error, Result};
use crate::glm::fit_logistic;
use crate::linalg::Matrix;
use crate::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingVerdict {
    PsiLePsiStar,
    PsiGePsiStar,
    /// The defining inequality holds with equality.
    IndeterminateAtEquality,
    /// The sufficient condition does not fire.
    Unknown,
}

/// Pointwise check at one covariate value.
///
/// `q1_star` and `q0_star` are `P(T*=1 | Y=y, X=x)` for cases and controls.
/// Over-reporting: `ψ(x) ≤ ψ*(x)` iff `q₁* η₀ ≤ q₀* η₁`. Under-reporting:
/// `ψ(x) ≤ ψ*(x)` iff `(1-q₁*) ζ₀ ≥ (1-q₀*) ζ₁`.
pub fn check_ordering_conditional(q1_star: f64, q0_star: f64, bias: &RecallBias<f64>) -> OrderingVerdict {
    let (le_side, ge_side) = match bias.direction {
        BiasDirection::None => return OrderingVerdict::IndeterminateAtEquality,
        BiasDirection::OverReporting => (
            q1_star * bias.theta_control,
            q0_star * bias.theta_case,
        ),
        BiasDirection::UnderReporting => (
            (1.0 - q0_star) * bias.theta_case,
            (1.0 - q1_star) * bias.theta_control,
        ),
    };
    if le_side < ge_side {
        OrderingVerdict::PsiLePsiStar
    } else if le_side > ge_side {
        OrderingVerdict::PsiGePsiStar
    } else {
        OrderingVerdict::IndeterminateAtEquality
    }
}

/// Sufficient conditions on the range of the conditional odds ratio that
/// order the marginal `ψ` and `ψ*`. A zero denominator parameter makes the
/// threshold ratio `+∞`.
pub fn check_ordering_marginal(
    psi_x_min: f64,
    psi_x_max: f64,
    bias: &RecallBias<f64>,
) -> Result<OrderingVerdict> {
    if !(psi_x_min > 0.0 && psi_x_min <= psi_x_max) {
        return Err(Error::InvalidInput(format!(
            "need 0 < psi_x_min <= psi_x_max, got [{psi_x_min}, {psi_x_max}]"
        )));
    }
    if bias.is_zero() || bias.direction == BiasDirection::None {
        return Ok(OrderingVerdict::IndeterminateAtEquality);
    }
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    let (t0, t1) = (bias.theta_control, bias.theta_case);
    let (le, ge) = match bias.direction {
        BiasDirection::OverReporting => {
            let r = ratio(t1, t0);
            (t0 <= t1 && psi_x_max <= r, t0 >= t1 && psi_x_min >= r)
        }
        BiasDirection::UnderReporting => {
            let r = ratio(t0, t1);
            (t0 >= t1 && psi_x_max <= r, t0 <= t1 && psi_x_min >= r)
        }
        BiasDirection::None => unreachable!(),
    };
    Ok(match (le, ge) {
        (true, true) => OrderingVerdict::IndeterminateAtEquality,
        (true, false) => OrderingVerdict::PsiLePsiStar,
        (false, true) => OrderingVerdict::PsiGePsiStar,
        (false, false) => OrderingVerdict::Unknown,
    })
}

/// Pointwise verdicts over a dataset, with `q_y*(x)` from the logistic model
/// `T* ~ Y + X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingSummary {
    pub psi_le_psi_star: usize,
    pub psi_ge_psi_star: usize,
    pub at_equality: usize,
    /// Shared verdict when every record agrees, `Unknown` otherwise.
    pub overall: OrderingVerdict,
    /// Coefficient of `Y` in the report model.
    pub outcome_coefficient: f64,
}

pub fn check_ordering_data(data: &Dataset, bias: &RecallBias<f64>) -> Result<OrderingSummary> {
    let p = data.p();
    let mut x = Vec::with_capacity(data.n() * (p + 1));
    for i in 0..data.n() {
        x.push(if data.y(i) { 1.0 } else { 0.0 });
        x.extend_from_slice(data.x(i));
    }
    let fit = fit_logistic(&Matrix::from_row_major(data.n(), p + 1, x), data.exposures(), None)?;
    fit.require_converged("report model")?;
    let mut counts = [0usize; 3];
    let mut row = vec![0.0; p + 1];
    for i in 0..data.n() {
        row[1..].copy_from_slice(data.x(i));
        row[0] = 1.0;
        let q1 = fit.predict_prob(&row);
        row[0] = 0.0;
        let q0 = fit.predict_prob(&row);
        match check_ordering_conditional(q1, q0, bias) {
            OrderingVerdict::PsiLePsiStar => counts[0] += 1,
            OrderingVerdict::PsiGePsiStar => counts[1] += 1,
            _ => counts[2] += 1,
        }
    }
    let n = data.n();
    let overall = if counts[0] == n {
        OrderingVerdict::PsiLePsiStar
    } else if counts[1] == n {
        OrderingVerdict::PsiGePsiStar
    } else if counts[2] == n {
        OrderingVerdict::IndeterminateAtEquality
    } else {
        OrderingVerdict::Unknown
    };
    Ok(OrderingSummary {
        psi_le_psi_star: counts[0],
        psi_ge_psi_star: counts[1],
        at_equality: counts[2],
        overall,
        outcome_coefficient: fit.slopes()[0],
    })
}
