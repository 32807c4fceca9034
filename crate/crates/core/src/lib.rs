//! Marginal causal odds ratios from case-control data with differential
//! recall bias.
//!
//! The numerical core (logistic fitting, the observed-data likelihood, table
//! corrections and the stratified estimators) is generic over the scalar
//! type. Floating-point code is bounded by [`Real`] (`f32`, `f64`); the
//! table algebra only needs field operations and is bounded by [`Scalar`],
//! which [`Rational`] also satisfies so monotonicity properties can be
//! checked in exact arithmetic.
//!
//! Resampling, sensitivity scans and the simulation harness run on `f64`
//! through the [`Dataset`] alias.

pub mod data;
pub mod error;
pub mod estimator;
pub mod glm;
pub mod linalg;
pub mod ml;
pub mod optim;
pub mod ordering;
pub mod scalar;
pub mod seeds;
pub mod sensitivity;
pub mod simulation;
pub mod strata;

pub use data::{
    load_csv, validate_bias_feasibility, write_csv, BiasDirection, CaseControlData, CsvSchema,
    EstimateResult, FeasibilityWarning, Method, RecallBias,
};
pub use error::{Error, Result};
pub use estimator::{estimate, EstimatorSpec};
pub use glm::{fit_logistic, LogisticFit};
pub use ml::{fit_ml, joint_prob, ml_marginal_cor, MlParams, OutcomeModel};
pub use ordering::{check_ordering_conditional, check_ordering_data, check_ordering_marginal, OrderingVerdict};
pub use scalar::{Real, Scalar};
pub use sensitivity::{bootstrap_ci, r_factor, sensitivity_scan, RFactorResult, SensitivityGrid};
pub use strata::{
    build_strata, correct_table, mantel_haenszel_cor, stratified_marginal_cor, CorrectedTable,
    ScoreKind, Strata, StratumTable,
};

/// Arbitrary-precision rational, used for exact evaluation of table corrections.
pub type Rational = num_rational::BigRational;

/// Case-control data with double-precision covariates.
pub type Dataset = CaseControlData<f64>;
/// Recall-bias parameters in double precision.
pub type Bias = RecallBias<f64>;
/// Recall-bias parameters in exact arithmetic.
pub type ExactBias = RecallBias<Rational>;
/// Bias-corrected table in double precision.
pub type CorrectedTable64 = CorrectedTable<f64>;
/// Bias-corrected table in exact arithmetic.
pub type ExactCorrectedTable = CorrectedTable<Rational>;
/// Logistic fit in double precision.
pub type LogisticFit64 = LogisticFit<f64>;
/// Likelihood parameters in double precision.
pub type MlParams64 = MlParams<f64>;

/// Crate version, embedded in every machine-readable output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
