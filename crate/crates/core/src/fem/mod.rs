//! Lagrange P1/P2 finite elements on simplicial meshes.

mod assembly;
mod basis;
mod dofmap;
mod flux;
mod quadrature;

pub use assembly::{
    apply_dirichlet, assemble_boundary_mass, assemble_facet_load, assemble_load, assemble_mass, assemble_stiffness,
    assemble_volume_load, evaluate_field, l2_error, neumann_levels, Coefficient, NEUMANN_LEVELS_2D, NEUMANN_LEVELS_3D,
};
pub(crate) use assembly::facet_points_in_cell;
pub use basis::{eval as eval_basis, grad as grad_basis, local_edges, n_local, MAX_LOCAL};
pub use dofmap::{build_dofmap, DofMap};
pub use flux::{laser_flux, LASER_PEAK, LASER_WIDTH};
pub use quadrature::{gauss_legendre, QuadratureRule};
