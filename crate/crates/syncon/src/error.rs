//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, simulators, estimators, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Input contains NaN or infinite entries.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Design matrix is numerically rank deficient for an OLS-type regime.
    #[error("rank-deficient design in {regime} regime (condition estimate {cond:.3e} exceeds 1e12)")]
    RankDeficient { regime: String, cond: f64 },

    /// A weight vector handed to a certificate routine is not feasible.
    #[error("infeasible weights for {0} regime: {1}")]
    InfeasibleInput(String, String),

    /// Matrix or vector dimensions are inconsistent.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Scenario configuration violates its invariants.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Estimator needs covariates but the panel carries none.
    #[error("missing covariates: {0}")]
    MissingCovariates(String),

    /// Estimator precondition failed (e.g. too few pre-treatment periods).
    #[error("{0}")]
    Precondition(String),

    /// Nested outer search produced no usable evaluation.
    #[error("outer V-search failed: {0}")]
    OuterSearchFailed(String),

    /// Every replication of a Monte Carlo run failed for an estimator.
    #[error("all {replications} replications failed for estimator '{estimator}'; first failure: {first_failure}")]
    AllReplicationsFailed {
        estimator: String,
        replications: usize,
        first_failure: String,
    },

    /// A summary cell has no counterpart in the reference table.
    #[error("missing reference cell: panel={panel}, estimator={estimator}, J={j}, statistic={statistic}")]
    MissingReferenceCell {
        panel: String,
        estimator: String,
        j: usize,
        statistic: String,
    },

    /// Malformed text in a CSV, config, or reference file.
    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    ParseError {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    /// Panel CSV has no column named `unit0`.
    #[error("panel file {0} has no treated column 'unit0'")]
    MissingTreatedColumn(String),

    /// Time column is not strictly increasing.
    #[error("non-monotone time in {path}: row {row} (time {current} after {previous})")]
    NonMonotoneTime {
        path: String,
        row: usize,
        previous: f64,
        current: f64,
    },

    /// A data cell parsed to NaN or infinity.
    #[error("non-finite cell in {path} at row {row}, column '{column}'")]
    NonFiniteCell {
        path: String,
        row: usize,
        column: String,
    },

    #[error("unknown estimator id '{0}'")]
    UnknownEstimator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
