use crate::transition::ConvergenceReport;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Gamma evaluated at a non-positive integer.
    #[error("gamma pole: x = {x} is a non-positive integer")]
    GammaPole { x: f64 },

    /// Gamma result too large for f64.
    #[error("gamma overflow: x = {x} exceeds the representable range")]
    GammaOverflow { x: f64 },

    /// A scalar or structural argument failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evaluation requested outside the domain of definition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes of matrix operands do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Two series/polynomials anchored at different expansion points.
    #[error("origin mismatch: {left} vs {right}")]
    OriginMismatch { left: f64, right: f64 },

    /// A derivative produced an exponent whose power function is not
    /// locally integrable at the origin.
    #[error("not locally integrable: resulting exponent {exponent} < 0 with a nonzero coefficient")]
    NotIntegrable { exponent: f64 },

    /// A series summation hit its term cap before meeting its tolerance.
    #[error("no convergence within {terms} terms (last term magnitude {last_magnitude:e})")]
    NonConvergence { terms: usize, last_magnitude: f64 },

    /// An iterated-integral construction hit its term cap while the term
    /// norms were still growing; the report carries the observed norms.
    #[error("series diverging: term ratios still >= 1 at the term cap ({report})")]
    Diverged { report: ConvergenceReport },
}

pub type Result<T> = std::result::Result<T, Error>;
