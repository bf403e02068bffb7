//! Sparse and dense linear algebra: CSR storage, direct and Krylov solvers,
//! spectral-radius estimation and polynomial least squares.

mod dense;
mod envelope;
mod fit;
mod krylov;
mod solver;
mod sparse;
mod spectral;

pub use dense::{qr_least_squares, DenseLu, DenseMatrix};
pub use envelope::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use fit::{least_squares_fit, PolynomialFit, SpectralFit};
pub use krylov::{conjugate_gradient, gmres, gmres_with};
pub use solver::{solve, Factor, Preconditioner, SolverConfig, SolverMethod};
pub use sparse::{SparseMatrix, TripletBuilder};
pub use spectral::{
    dense_iteration_matrix, dense_matrix_spectral_radius, dense_spectral_radius, power_iteration_rho,
    relax_in_place, seeded_unit_vector, PowerEstimate, DENSE_SPECTRAL_LIMIT,
};

/// Coefficient vector.
pub type DenseVector<T> = Vec<T>;
