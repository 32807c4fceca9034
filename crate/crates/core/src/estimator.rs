//! Method dispatch shared by the CLI, bootstrap, sensitivity scans and the
//! simulation harness.

use serde::Serialize;

use crate::data::{CaseControlData, EstimateResult, Method, RecallBias};
use crate::error::Result;
use crate::ml::{ml_marginal_cor_with, MlOptions, OutcomeModel};
use crate::scalar::Real;
use crate::strata::{
    build_strata_with, crude_cor, mantel_haenszel_cor_with, stratified_marginal_cor_with,
    PrognosticFit, ScoreKind,
};

/// Default number of score strata (quintiles).
pub const DEFAULT_STRATA: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorSpec {
    pub method: Method,
    pub n_strata: usize,
    /// Strata for the Mantel-Haenszel estimator.
    pub mh_strata: ScoreKind,
    pub prognostic_fit: PrognosticFit,
    pub outcome_model: OutcomeModel,
    pub continuity_correction: bool,
}

impl EstimatorSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            n_strata: DEFAULT_STRATA,
            mh_strata: ScoreKind::Prognostic,
            prognostic_fit: PrognosticFit::Auto,
            outcome_model: OutcomeModel::Shared,
            continuity_correction: false,
        }
    }
}

/// Runs the full pipeline for one method: score fitting and strata where
/// needed, then the estimator on bias-corrected quantities.
pub fn estimate<F: Real>(
    data: &CaseControlData<F>,
    spec: &EstimatorSpec,
    bias: &RecallBias<F>,
) -> Result<EstimateResult> {
    data.require_both_outcomes()?;
    let strata = |kind| {
        build_strata_with(data, kind, spec.n_strata, bias.direction, spec.prognostic_fit)
    };
    match spec.method {
        Method::Crude => crude_cor(data, bias),
        Method::ML => {
            let opts = MlOptions {
                outcome_model: spec.outcome_model,
                ..MlOptions::default()
            };
            ml_marginal_cor_with(data, bias, &opts)
        }
        Method::StratPropensity => stratified_marginal_cor_with(
            data,
            &strata(ScoreKind::Propensity)?,
            bias,
            spec.continuity_correction,
        ),
        Method::StratPrognostic => stratified_marginal_cor_with(
            data,
            &strata(ScoreKind::Prognostic)?,
            bias,
            spec.continuity_correction,
        ),
        Method::MantelHaenszel => {
            mantel_haenszel_cor_with(data, &strata(spec.mh_strata)?, bias, spec.continuity_correction)
        }
    }
}
