use thiserror::Error;

/// Errors produced by the estimators, the eigenvalue maps and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions (worst error/tolerance ratio {worst_ratio:.3e})"
    )]
    Quadrature {
        subdivisions: usize,
        /// Largest `estimated_error / tolerance` over all components.
        worst_ratio: f64,
    },

    /// Quadrature finished but the eigenvalues of the map do not sum to one.
    #[error("spectrum sum defect {defect:.3e} exceeds allowed {allowed:.3e}")]
    SumDefect { defect: f64, allowed: f64 },

    /// An iterative solver stopped without meeting its tolerance.
    #[error("{what} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Shape estimation stopped before the eigenvalue inversion converged.
    /// The best estimate found is attached.
    #[error("eigenvalue inversion did not converge (residual {:.3e})", .0.inversion.residual)]
    InversionFailed(Box<crate::inversemap::ShapeEstimate>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
