use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its type invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two points in a set that must be pairwise distinct coincide.
    #[error("duplicate points at indices {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Per-level counts increase somewhere, so the point sets cannot be nested.
    #[error("counts are not non-increasing at level {level} ({prev} -> {next})")]
    NonMonotoneStructure { level: usize, prev: usize, next: usize },

    /// Cholesky failed even with the largest diagonal jitter.
    #[error("factorization failed at level {level} (condition estimate {condition:.3e}, jitter {jitter:.1e})")]
    Factorization {
        level: usize,
        condition: f64,
        jitter: f64,
    },

    #[error("budget {budget} is below the cheapest sample cost {cheapest}")]
    BudgetTooSmall { budget: f64, cheapest: f64 },

    #[error("level/point mismatch: {0}")]
    LevelMismatch(String),

    #[error("{0}")]
    Infeasible(String),

    /// Configuration text could not be parsed.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
