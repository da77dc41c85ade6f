use std::fmt;

use thiserror::Error;

use crate::system::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Validation,
    Budget,
    Numeric,
    Io,
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Validation => "validation",
            ErrorClass::Budget => "budget",
            ErrorClass::Numeric => "numeric",
            ErrorClass::Io => "io",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus {modulus}: {reason}")]
    InvalidModulus { modulus: u64, reason: &'static str },

    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),

    #[error("variable count mismatch: expected {expected}, found {found}")]
    VarCountMismatch { expected: usize, found: usize },

    #[error("exponent overflow: exceeds {}", crate::poly::MAX_EXPONENT)]
    ExponentOverflow,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system violates {} structural condition(s): {}", .0.len(), join_violations(.0))]
    Structure(Vec<Violation>),

    #[error(
        "iterate of coordinate {coordinate} at step {k} is not of the form X_i*g + h: {reason}"
    )]
    Decomposition {
        coordinate: usize,
        k: usize,
        reason: String,
    },

    #[error("{what} exceeds budget: needs {needed}, limit {limit}")]
    Budget {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("symbolic iteration exceeded {limit} terms; largest completed k = {completed_k}")]
    IterateBudget { completed_k: usize, limit: usize },

    #[error("numeric drift: computed {computed}, expected {expected}")]
    NumericDrift { computed: f64, expected: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Structure(_) | Error::Decomposition { .. } => ErrorClass::Validation,
            Error::Budget { .. } | Error::IterateBudget { .. } => ErrorClass::Budget,
            Error::NumericDrift { .. } => ErrorClass::Numeric,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Usage,
        }
    }

    pub(crate) fn budget(what: &'static str, needed: u128, limit: u128) -> Self {
        Error::Budget {
            what,
            needed,
            limit,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
