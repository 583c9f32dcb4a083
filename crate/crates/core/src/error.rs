use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {required} complete pairs, found {n_c}")]
    TooFewComplete { n_c: usize, required: usize },
    #[error("no observations with a missing second component; use a plain paired test")]
    NoIncomplete,
    #[error("need at least {required} records, found {found}")]
    TooFewRecords { found: usize, required: usize },
    #[error("row {row}: value is not finite")]
    NonFinite { row: usize },
    #[error("row {row}: first component is missing")]
    MissingFirstComponent { row: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("trace of the projected covariance is not positive ({0})")]
    DegenerateTrace(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid counts: cannot delete {n_u} of {n} second components")]
    InvalidCounts { n: usize, n_u: usize },
    #[error("missingness pattern redraw exhausted after {attempts} attempts")]
    PatternRedrawExhausted { attempts: usize },
    #[error("{degenerate} of {total} bootstrap replicates were degenerate")]
    DegenerateReplicates { degenerate: usize, total: usize },
    #[error("{kind} is not a bootstrap statistic")]
    NotBootstrapKind { kind: &'static str },
    #[error("p-value #{index} is outside [0, 1]: {value}")]
    InvalidPValue { index: usize, value: f64 },
    #[error("config {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
