//! Batch driver: error norms, observed orders, and convergence studies.
