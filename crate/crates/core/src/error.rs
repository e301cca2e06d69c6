use thiserror::Error;

/// Errors produced by the solvers and numerical kernels.
#[derive(Debug, Error)]
pub enum PruneError {
    /// Shapes, budgets, or scalar parameters that violate an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The instance has no usable signal (zero denominator, all-zero Gram diagonal, ...).
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// A restricted Gram submatrix could not be factored.
    #[error("singular restricted system for output column {column}")]
    DegenerateSupport { column: usize },

    /// Conjugate gradient met a zero-curvature direction with a nonzero residual.
    #[error("PCG breakdown at iteration {iteration}: zero curvature with residual norm {residual:e}")]
    Breakdown { iteration: usize, residual: f64 },

    /// An iteration trace that cannot be analysed.
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    /// Exhaustive enumeration requested on an instance above the guard.
    #[error("instance too large for enumeration: {weights} weights (limit {limit})")]
    TooLarge { weights: usize, limit: usize },

    #[error(transparent)]
    File(#[from] crate::io::MatrixFileError),
}

impl PruneError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PruneError::InvalidInput(msg.into())
    }

    /// True for the failure classes that the CLI reports as a degenerate instance.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            PruneError::Degenerate(_) | PruneError::DegenerateSupport { .. } | PruneError::Breakdown { .. }
        )
    }
}

pub type Result<T, E = PruneError> = std::result::Result<T, E>;
