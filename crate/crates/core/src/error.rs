use std::fmt;

use thiserror::Error;

/// A single way in which a raw heredity array fails to define a QSO.
///
/// Indices are stored 0-based and printed 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Asymmetry { i: usize, j: usize, k: usize },
    ColumnSum { i: usize, j: usize, sum: f64 },
    NegativeEntry { i: usize, j: usize, k: usize },
    NonFinite { i: usize, j: usize, k: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Asymmetry { i, j, k } => write!(
                f,
                "asymmetry: P[{},{},{}] != P[{},{},{}]",
                i + 1,
                j + 1,
                k + 1,
                j + 1,
                i + 1,
                k + 1
            ),
            Violation::ColumnSum { i, j, sum } => {
                write!(
                    f,
                    "column ({},{}) sums to {sum:?}, expected 1",
                    i + 1,
                    j + 1
                )
            }
            Violation::NegativeEntry { i, j, k } => {
                write!(f, "negative entry P[{},{},{}]", i + 1, j + 1, k + 1)
            }
            Violation::NonFinite { i, j, k } => {
                write!(f, "non-finite entry P[{},{},{}]", i + 1, j + 1, k + 1)
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum QsoError {
    #[error("heredity array is not cubic: {0}")]
    Shape(String),
    #[error("dimension must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("invalid operator ({} violation(s)): {}", .0.len(), join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not a simplex point: {0}")]
    NotOnSimplex(String),
    #[error("Volterra condition fails at coordinate {k}: P[{i},{j},{k}] > 0", k = .k + 1, i = .i + 1, j = .j + 1)]
    PrefixViolation { i: usize, j: usize, k: usize },
    #[error("ell = {ell} is outside 0..={m}")]
    EllOutOfRange { ell: usize, m: usize },
    #[error("index {index} is outside 1..={m}", index = .index + 1)]
    IndexOutOfRange { index: usize, m: usize },
    #[error("entry P[{},{},{}] = {value:?} is not strictly between 0 and 1", .i + 1, .j + 1, .k + 1)]
    EntryNotFractional {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },
    #[error("mixing weight {0:?} is outside [0, 1]")]
    BadWeight(f64),
    #[error("enumeration refused for m = {m}; the limit is {limit}")]
    SizeGuardExceeded { m: usize, limit: usize },
    #[error("invalid cycle spec: {0}")]
    CycleSpec(String),
    #[error("parameter out of range: {0}")]
    ParamRange(String),
    #[error("bad argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed operator JSON: {0}")]
    Json(String),
}

impl QsoError {
    /// Whether the error stems from the input operator or point rather than
    /// from how the program was invoked.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            QsoError::Argument(_) | QsoError::Io { .. } | QsoError::SizeGuardExceeded { .. }
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = QsoError> = std::result::Result<T, E>;
