//! Virtual element discretization of the time-dependent Poisson-Nernst-Planck
//! system on general polygonal meshes.
//!
//! The crate is organized around the pipeline of a convergence study:
//!
//! * [`mesh`] — polygonal meshes of the unit square: six deterministic
//!   generators (triangles, squares, non-convex hexagons, mixed polygons,
//!   random and Lloyd-smoothed Voronoi), geometry queries and shape-quality
//!   validation, plus a plain-text file format.
//! * [`quadrature`] — scaled monomial bases and exact-to-order Gauss rules on
//!   polygons (fan triangulation) and edges.
//! * [`vem`] — the per-element virtual element machinery: degrees of freedom,
//!   elliptic and L2 projectors, and the stabilized local matrices for the
//!   diffusion, mass, drift-coupling and charge-coupling forms.
//! * [`system`] — global dof numbering with homogeneous Dirichlet elimination,
//!   sparse assembly, linear solvers, and the backward Euler time loop with
//!   Gummel decoupling of the Poisson and Nernst-Planck blocks.
//! * [`manufactured`] — an analytic solution triple with derived source terms,
//!   used to measure errors against the discrete solution.
//! * [`study`] — error norms, observed convergence orders, and the batch
//!   driver that produces CSV tables and log-log SVG plots.

pub mod geom;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod study;
pub mod system;
pub mod vem;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
