//! The two-level iteration and its reference solvers.
//!
//! One sweep solves the local strip problem with the current global trace,
//! then the global problem with the resulting flux jump, and relaxes:
//! `T_+^{k+1} = θ K_+⁻¹ (f_+ − S K_−⁻¹ (f_− − D T_+^k)) + (1 − θ) T_+^k`.

mod iteration;
mod reference;

pub use iteration::{run_two_level_dd, step0, DDConfig, DDOutcome, DDReport, TwoLevelSolver};
pub use reference::{
    block_gauss_seidel, build_fitted_mesh, eval_field, eval_two_level, l2_distance, neumann_partial_sum,
    run_coupled_dense, run_coupled_direct, run_coupled_schur, run_fitted_reference, solve_fitted, strip_coefficients,
    write_solution_csv, FittedSolution, RefinementMode, COUPLED_DENSE_LIMIT,
};
