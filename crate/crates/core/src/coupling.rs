//! Cross-mesh operators of the two-level method and the coupled block system
//!
//! ```text
//! [ K_+  S  ] [T_+]   [f_+]
//! [ D   K_− ] [T_−] = [f_−]
//! ```
//!
//! `K_+` lives on the unfitted global mesh with the extended coefficient,
//! `K_−` on the fitted local strip with the interface penalty, `S` carries the
//! flux jump from local to global and `D` the penalized trace from global to
//! local.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, assemble_boundary_mass, assemble_facet_load, assemble_stiffness, assemble_volume_load,
    build_dofmap, eval_basis, facet_points_in_cell, grad_basis, laser_flux, neumann_levels, Coefficient, DofMap,
    QuadratureRule,
};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{build_global_mesh, build_local_mesh, FacetTag, GeometryConfig, StructuredMesh};
use crate::scalar::{Point, Real};

/// Wall temperature on the outer Dirichlet boundary.
pub const T_AMBIENT: f64 = 293.15;

/// How the interface penalty `α` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AlphaPolicy {
    /// `α = factor · max(1, κ_−) / h_−`
    Scaled { factor: f64 },
    /// A fixed value.
    Fixed { value: f64 },
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        AlphaPolicy::Scaled { factor: 1e6 }
    }
}

impl AlphaPolicy {
    pub fn alpha<T: Real>(&self, kappa_minus: T, h_minus: T) -> T {
        match *self {
            AlphaPolicy::Scaled { factor } => T::lit(factor) * kappa_minus.max(T::one()) / h_minus,
            AlphaPolicy::Fixed { value } => T::lit(value),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            AlphaPolicy::Scaled { factor } => factor,
            AlphaPolicy::Fixed { value } => value,
        };
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("penalty must be finite and non-negative, got {v}")))
        }
    }
}

type Field<'a, T> = Box<dyn Fn(&Point<T>) -> T + Send + Sync + 'a>;

/// Source, top flux and wall temperature of the physical problem.
pub struct ProblemData<'a, T> {
    pub source: Field<'a, T>,
    pub flux: Field<'a, T>,
    pub t_dirichlet: T,
}

impl<'a, T: Real> ProblemData<'a, T> {
    pub fn new(
        source: impl Fn(&Point<T>) -> T + Send + Sync + 'a,
        flux: impl Fn(&Point<T>) -> T + Send + Sync + 'a,
        t_dirichlet: T,
    ) -> Self {
        Self { source: Box::new(source), flux: Box::new(flux), t_dirichlet }
    }

    /// No source, the peaked top flux, walls at ambient temperature.
    pub fn laser(geom: &GeometryConfig<T>) -> Self {
        let g = *geom;
        Self::new(|_| T::zero(), move |x| laser_flux(x, &g), T::lit(T_AMBIENT))
    }

    /// All data zero.
    pub fn homogeneous() -> Self {
        Self::new(|_| T::zero(), |_| T::zero(), T::zero())
    }
}

/// Global and local meshes with their dof numberings.
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub geom: GeometryConfig<T>,
    pub degree: usize,
    pub global_mesh: StructuredMesh<T>,
    pub local_mesh: StructuredMesh<T>,
    pub global_dofs: DofMap<T>,
    pub local_dofs: DofMap<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(geom: &GeometryConfig<T>, h_plus: T, h_minus: T, degree: usize) -> Result<Self> {
        let global_mesh = build_global_mesh(geom, h_plus)?;
        let local_mesh = build_local_mesh(geom, h_minus)?;
        let global_dofs = build_dofmap(&global_mesh, degree)?;
        let local_dofs = build_dofmap(&local_mesh, degree)?;
        Ok(Self { geom: *geom, degree, global_mesh, local_mesh, global_dofs, local_dofs })
    }

    pub fn h_plus(&self) -> T {
        self.global_mesh.h()
    }

    pub fn h_minus(&self) -> T {
        self.local_mesh.h()
    }

    pub fn n_plus(&self) -> usize {
        self.global_dofs.n_dofs()
    }

    pub fn n_minus(&self) -> usize {
        self.local_dofs.n_dofs()
    }

    /// Centroids of global cells lying in the strip.
    pub fn global_cells_in_strip(&self) -> Vec<bool> {
        (0..self.global_mesh.n_cells())
            .map(|c| self.geom.in_strip(&self.global_mesh.cell_centroid(c)))
            .collect()
    }
}

/// Coefficients of a (possibly frozen nonlinear) coupled problem.
#[derive(Clone, Copy, Debug)]
pub struct CouplingCoefficients<'a, T> {
    /// Extended coefficient on the global mesh.
    pub kappa_plus: Coefficient<'a, T>,
    /// Value of the extended coefficient inside the strip.
    pub kappa_plus_b: T,
    /// Strip coefficient on the local mesh.
    pub kappa_minus: Coefficient<'a, T>,
    pub alpha: T,
}

/// Assembled block system of the two-level method.
#[derive(Clone, Debug)]
pub struct CoupledOperators<T> {
    pub k_plus: SparseMatrix<T>,
    pub k_minus: SparseMatrix<T>,
    /// `n_+ × n_−`
    pub s: SparseMatrix<T>,
    /// `n_− × n_+`
    pub d: SparseMatrix<T>,
    pub f_plus: Vec<T>,
    pub f_minus: Vec<T>,
    pub alpha: T,
    pub dirichlet_plus: Vec<usize>,
    pub dirichlet_minus: Vec<usize>,
}

impl<T: Real> CoupledOperators<T> {
    pub fn n_plus(&self) -> usize {
        self.k_plus.nrows()
    }

    pub fn n_minus(&self) -> usize {
        self.k_minus.nrows()
    }

    /// `‖A x − b‖ / ‖b‖` for the full block system.
    pub fn block_residual(&self, t_plus: &[T], t_minus: &[T]) -> T {
        let mut r_plus = self.k_plus.mul_vec(t_plus);
        let st = self.s.mul_vec(t_minus);
        let mut r_minus = self.k_minus.mul_vec(t_minus);
        let dt = self.d.mul_vec(t_plus);
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..r_plus.len() {
            r_plus[i] += st[i] - self.f_plus[i];
            num += r_plus[i] * r_plus[i];
            den += self.f_plus[i] * self.f_plus[i];
        }
        for i in 0..r_minus.len() {
            r_minus[i] += dt[i] - self.f_minus[i];
            num += r_minus[i] * r_minus[i];
            den += self.f_minus[i] * self.f_minus[i];
        }
        (num / den).sqrt()
    }

    /// The full `(n_+ + n_−)` block matrix.
    pub fn block_matrix(&self) -> SparseMatrix<T> {
        let (np, nm) = (self.n_plus(), self.n_minus());
        let mut b = TripletBuilder::with_capacity(
            np + nm,
            np + nm,
            self.k_plus.nnz() + self.k_minus.nnz() + self.s.nnz() + self.d.nnz(),
        );
        let mut put = |m: &SparseMatrix<T>, r0: usize, c0: usize| {
            for i in 0..m.nrows() {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    b.push(r0 + i, c0 + j, v);
                }
            }
        };
        put(&self.k_plus, 0, 0);
        put(&self.s, 0, np);
        put(&self.d, np, 0);
        put(&self.k_minus, np, np);
        b.build()
    }

    /// Write `K_plus.mtx`, `K_minus.mtx`, `S.mtx` and `D.mtx` into `dir`.
    pub fn write_matrix_market(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, m) in [("K_plus", &self.k_plus), ("K_minus", &self.k_minus), ("S", &self.s), ("D", &self.d)] {
            let f = std::fs::File::create(dir.join(format!("{name}.mtx")))?;
            m.write_matrix_market(std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

/// Flux-jump operator `S_ij = −∫_γ jump · (∇ψ_j · n) φ_i` with `ψ_j` local,
/// `φ_i` global and `n` the outward normal of the strip. `jump(c)` is
/// `κ_+ − κ_−` on local cell `c`. Rows of `zero_rows` are cleared.
///
/// The minus sign places the term on the left of the global equation,
/// `K_+ T_+ + S T_− = f_+`, so that the block system is consistent with
/// the extended weak form.
pub fn assemble_flux_jump<T: Real>(
    disc: &Discretization<T>,
    jump: impl Fn(usize) -> T,
    zero_rows: &[usize],
) -> Result<SparseMatrix<T>> {
    let (gm, lm) = (&disc.global_mesh, &disc.local_mesh);
    let (gd, ld) = (&disc.global_dofs, &disc.local_dofs);
    let dim = gm.dim();
    let m = disc.degree;
    let rule = QuadratureRule::<T>::simplex(dim - 1, 2 * m + 1);
    let mut b = TripletBuilder::new(gd.n_dofs(), ld.n_dofs());
    for (k, facet) in lm.boundary_facets().iter().enumerate() {
        if facet.tag != FacetTag::InterfaceGamma {
            continue;
        }
        if facet.cell >= lm.n_cells() {
            return Err(Error::OrphanInterfaceFacet(k));
        }
        let j = jump(facet.cell);
        if j == T::zero() {
            continue;
        }
        let n = lm.facet_outward_normal(facet);
        let g = lm.cell_geometry(facet.cell).barycentric_gradients();
        let ldofs = ld.cell_dofs(facet.cell);
        for (lam, x, w) in facet_points_in_cell(lm, facet, &rule)? {
            let grads = grad_basis(dim, m, &lam, &g);
            let loc = gm.locate_point(&x)?;
            let phi = eval_basis(dim, m, &loc.barycentric);
            let gdofs = gd.cell_dofs(loc.cell_index);
            for (a, &ga) in gdofs.iter().enumerate() {
                if phi[a] == T::zero() {
                    continue;
                }
                for (bb, &lb) in ldofs.iter().enumerate() {
                    let dn: T = (0..dim).map(|c| grads[bb][c] * n[c]).sum();
                    let v = -j * w * dn * phi[a];
                    if v != T::zero() {
                        b.push(ga, lb, v);
                    }
                }
            }
        }
    }
    Ok(clear_rows(b.build(), zero_rows))
}

/// Penalty trace operator `D_ij = −α ∫_γ φ_j ψ_i` with `ψ_i` local and `φ_j`
/// global. Rows of `zero_rows` are cleared.
pub fn assemble_penalty<T: Real>(disc: &Discretization<T>, alpha: T, zero_rows: &[usize]) -> Result<SparseMatrix<T>> {
    let (gm, lm) = (&disc.global_mesh, &disc.local_mesh);
    let (gd, ld) = (&disc.global_dofs, &disc.local_dofs);
    let dim = gm.dim();
    let m = disc.degree;
    let rule = QuadratureRule::<T>::simplex(dim - 1, 2 * m + 1);
    let mut b = TripletBuilder::new(ld.n_dofs(), gd.n_dofs());
    if alpha != T::zero() {
        for facet in lm.facets_with_tag(FacetTag::InterfaceGamma) {
            let ldofs = ld.cell_dofs(facet.cell);
            for (lam, x, w) in facet_points_in_cell(lm, &facet, &rule)? {
                let psi = eval_basis(dim, m, &lam);
                let loc = gm.locate_point(&x)?;
                let phi = eval_basis(dim, m, &loc.barycentric);
                let gdofs = gd.cell_dofs(loc.cell_index);
                for (a, &la) in ldofs.iter().enumerate() {
                    if psi[a] == T::zero() {
                        continue;
                    }
                    for (bb, &gb) in gdofs.iter().enumerate() {
                        let v = -alpha * w * psi[a] * phi[bb];
                        if v != T::zero() {
                            b.push(la, gb, v);
                        }
                    }
                }
            }
        }
    }
    Ok(clear_rows(b.build(), zero_rows))
}

fn clear_rows<T: Real>(m: SparseMatrix<T>, rows: &[usize]) -> SparseMatrix<T> {
    if rows.is_empty() {
        return m;
    }
    let mut mask = vec![false; m.nrows()];
    for &r in rows {
        mask[r] = true;
    }
    m.with_zero_rows(&mask)
}

/// Constant-coefficient coupled operators.
pub fn build_coupled_operators<T: Real>(
    disc: &Discretization<T>,
    problem: &ProblemData<'_, T>,
    kappa_plus: T,
    kappa_minus: T,
    alpha: &AlphaPolicy,
) -> Result<CoupledOperators<T>> {
    alpha.validate()?;
    let coeffs = CouplingCoefficients {
        kappa_plus: Coefficient::Constant(kappa_plus),
        kappa_plus_b: kappa_plus,
        kappa_minus: Coefficient::Constant(kappa_minus),
        alpha: alpha.alpha(kappa_minus, disc.h_minus()),
    };
    build_coupled_operators_with(disc, problem, &coeffs)
}

/// Coupled operators for arbitrary per-cell coefficients.
///
/// Global data is extended as `f̃ = (κ_{+,B}/κ_−) f` and `q̃ = (κ_{+,B}/κ_−) q`
/// inside the strip, with `κ_−` taken from the local cell containing the
/// point.
pub fn build_coupled_operators_with<T: Real>(
    disc: &Discretization<T>,
    problem: &ProblemData<'_, T>,
    coeffs: &CouplingCoefficients<'_, T>,
) -> Result<CoupledOperators<T>> {
    let (gm, lm) = (&disc.global_mesh, &disc.local_mesh);
    let (gd, ld) = (&disc.global_dofs, &disc.local_dofs);
    if !(coeffs.kappa_plus_b > T::zero()) {
        return Err(Error::NonpositiveCoefficient(coeffs.kappa_plus_b.to_f64_lossy()));
    }
    if !(coeffs.alpha >= T::zero()) {
        return Err(Error::InvalidConfig(format!("penalty must be non-negative, got {}", coeffs.alpha)));
    }
    let td = problem.t_dirichlet;
    let kappa_minus_at = |x: &Point<T>| -> T {
        match coeffs.kappa_minus {
            Coefficient::Constant(k) => k,
            Coefficient::PerCell(v) => lm.locate_point(x).map(|l| v[l.cell_index]).unwrap_or(coeffs.kappa_plus_b),
        }
    };
    let ratio_at = |x: &Point<T>| {
        if disc.geom.in_strip(x) {
            coeffs.kappa_plus_b / kappa_minus_at(x)
        } else {
            T::one()
        }
    };

    // global problem
    let dir_plus = gd.dofs_with_tag(gm, FacetTag::DirichletOuter);
    let stiff_plus = assemble_stiffness(gm, gd, coeffs.kappa_plus)?;
    let vol_degree = 2 * disc.degree + 2;
    let mut f_plus = assemble_volume_load(gm, gd, |x| ratio_at(x) * (problem.source)(x), vol_degree);
    let top = gm.facets_with_tag(FacetTag::NeumannTop);
    let q_plus = assemble_facet_load(gm, gd, &top, neumann_levels(gm.dim()), |_, x| ratio_at(x) * (problem.flux)(x))?;
    for (f, q) in f_plus.iter_mut().zip(q_plus) {
        *f += q;
    }
    let k_plus = apply_dirichlet(&stiff_plus, &mut f_plus, &dir_plus, td)?;

    // local problem
    let dir_minus = ld.dofs_with_tag(lm, FacetTag::DirichletOuter);
    let gamma = lm.facets_with_tag(FacetTag::InterfaceGamma);
    let stiff_minus = assemble_stiffness(lm, ld, coeffs.kappa_minus)?
        .add_scaled(&assemble_boundary_mass(lm, ld, &gamma, coeffs.alpha)?, T::one())?;
    let mut f_minus = assemble_volume_load(lm, ld, |x| (problem.source)(x), vol_degree);
    let ltop = lm.facets_with_tag(FacetTag::NeumannTop);
    let q_minus = assemble_facet_load(lm, ld, &ltop, neumann_levels(lm.dim()), |_, x| (problem.flux)(x))?;
    for (f, q) in f_minus.iter_mut().zip(q_minus) {
        *f += q;
    }
    let k_minus = apply_dirichlet(&stiff_minus, &mut f_minus, &dir_minus, td)?;

    let s = assemble_flux_jump(disc, |c| coeffs.kappa_plus_b - coeffs.kappa_minus.at(c), &dir_plus)?;
    let d = assemble_penalty(disc, coeffs.alpha, &dir_minus)?;
    Ok(CoupledOperators {
        k_plus,
        k_minus,
        s,
        d,
        f_plus,
        f_minus,
        alpha: coeffs.alpha,
        dirichlet_plus: dir_plus,
        dirichlet_minus: dir_minus,
    })
}
