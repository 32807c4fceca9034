use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: outcome must be 0 or 1, found `{value}`")]
    NonBinaryOutcome { row: usize, value: String },
    #[error("row {row}: exposure must be 0 or 1, found `{value}`")]
    NonBinaryExposure { row: usize, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: column `{column}` has non-numeric value `{value}`")]
    ParseValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid recall-bias parameters: {0}")]
    InvalidBias(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("singular design matrix")]
    SingularDesign,
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),
    #[error("fitted joint probability underflowed")]
    DegenerateLikelihood,
    #[error("marginal probabilities outside (0,1): p1={p1}, p0={p0}")]
    DegenerateMarginal { p1: f64, p0: f64 },
    #[error("stratum {stratum} has no {missing}")]
    EmptyStratum { stratum: usize, missing: &'static str },
    #[error("score model fit failed: {0}")]
    ScoreFitFailure(String),
    #[error("bias parameters give negative corrected counts in strata {strata:?}")]
    InfeasibleBias { strata: Vec<usize> },
    #[error("stratum {stratum} has an empty cell or margin")]
    EmptyStratumCell { stratum: usize },
    #[error("Mantel-Haenszel denominator is zero")]
    ZeroDenominator,
    #[error("{failed} of {total} bootstrap resamples failed")]
    TooManyFailedResamples { failed: usize, total: usize },
    #[error("scenario file line {line}: {message}")]
    Scenario { line: usize, message: String },
}

impl Error {
    /// Errors caused by malformed input rather than a failed estimation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::NonBinaryOutcome { .. }
                | Error::NonBinaryExposure { .. }
                | Error::RaggedRow { .. }
                | Error::ParseValue { .. }
                | Error::InvalidInput(_)
                | Error::InvalidBias(_)
                | Error::Scenario { .. }
        )
    }
}
