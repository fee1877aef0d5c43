use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// First broken invariant found when validating a [`PackingInstance`].
///
/// Indices are zero-based.
///
/// [`PackingInstance`]: crate::instance::PackingInstance
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyDimension { what: &'static str },
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    ColumnLength { column: usize, expected: usize, found: usize },
    NonPositiveBudget(f64),
    NegativeReward { index: usize, value: f64 },
    EntryOutOfRange { column: usize, row: usize, value: f64 },
    ZeroColumn { column: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDimension { what } => write!(f, "{what} must be at least 1"),
            Violation::LengthMismatch { what, expected, found } => {
                write!(f, "{what} has length {found}, expected {expected}")
            }
            Violation::ColumnLength { column, expected, found } => {
                write!(f, "column {column} has {found} entries, expected {expected}")
            }
            Violation::NonPositiveBudget(b) => write!(f, "budget {b} is not a positive finite number"),
            Violation::NegativeReward { index, value } => {
                write!(f, "reward {index} is {value}, must be finite and non-negative")
            }
            Violation::EntryOutOfRange { column, row, value } => {
                write!(f, "column {column} row {row}: entry {value} out of [0,1]")
            }
            Violation::ZeroColumn { column } => write!(f, "column {column} is zero"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Invalid(Violation),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("solver failure after {pivots} pivots: {reason}")]
    SolverFailure { pivots: usize, reason: String },

    #[error("direction net would hold {size} directions, cap is {cap}")]
    NetTooLarge { size: u128, cap: usize },

    #[error("{algorithm} produced an infeasible trace in trial {trial}")]
    Infeasible { algorithm: String, trial: usize },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<Violation> for Error {
    fn from(v: Violation) -> Self {
        Error::Invalid(v)
    }
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code used by the CLI: 2 for bad input, 3 for solver
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Parameter(_) | Error::NetTooLarge { .. } => 2,
            Error::SolverFailure { .. } => 3,
            Error::Trial { source, .. } => source.exit_code(),
            Error::Json(e) if !e.is_io() => 2,
            _ => 1,
        }
    }
}
