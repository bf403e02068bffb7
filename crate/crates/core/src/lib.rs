//! Two-level domain decomposition for piecewise-constant diffusion.
//!
//! A global problem on the full box is solved on a coarse unfitted mesh with
//! an extended coefficient, a local problem on a thin top strip is solved on a
//! fine fitted mesh, and the two are coupled through a penalized Dirichlet
//! trace and a flux-jump source term.

// `!(a > b)` rejects NaN; index loops mirror the element formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coupling;
pub mod dd;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod scalar;

pub use error::{Error, Result};

/// Double-precision aliases.
pub type Mesh = mesh::StructuredMesh<f64>;
pub type Geometry = mesh::GeometryConfig<f64>;
pub type Operators = coupling::CoupledOperators<f64>;
pub type Report = dd::DDReport<f64>;
pub type Matrix = linalg::SparseMatrix<f64>;
pub type Fit = linalg::SpectralFit<f64>;
