use thiserror::Error;

/// Errors produced by mesh construction, element operations and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A polygon is degenerate (non-positive area, too few vertices, ...).
    #[error("invalid element {element}: {reason}")]
    InvalidElement { element: usize, reason: String },

    /// Structural mesh defects collected by validation.
    #[error("mesh has {} structural defect(s): {}", .0.len(), .0.join("; "))]
    MeshDefects(Vec<String>),

    /// Only orders 1 and 2 of the local space are supported.
    #[error("unsupported space order k={0} (supported: 1, 2)")]
    UnsupportedOrder(usize),

    /// A local projector system could not be factored.
    #[error("singular projector system on element: {0}")]
    SingularProjector(String),

    /// An iterative or direct linear solve did not reach the requested tolerance.
    #[error("linear solver failed after {iterations} iterations, residual {residual:.3e}")]
    SolverFailure { iterations: usize, residual: f64 },

    /// The Poisson/Nernst-Planck fixed point did not converge.
    #[error(
        "fixed-point iteration did not converge in {max_iters} sweeps at t={t}; \
         increment history {history:?}"
    )]
    FixedPointDiverged {
        t: f64,
        max_iters: usize,
        history: Vec<f64>,
    },

    /// Malformed mesh file.
    #[error("mesh file parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
