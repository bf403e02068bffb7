use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::iteration::TwoLevelSolver;
use crate::coupling::{CoupledOperators, Discretization, ProblemData};
use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, assemble_load, assemble_stiffness, build_dofmap, eval_basis, Coefficient, DofMap,
    QuadratureRule,
};
use crate::linalg::{gmres_with, DenseMatrix, Factor, SolverConfig};
use crate::mesh::{build_graded_fitted_mesh, build_uniform_fitted_mesh, FacetTag, GeometryConfig, StructuredMesh};
use crate::scalar::{Point, Real};

/// Largest block system solved by dense LU in [`run_coupled_direct`].
pub const COUPLED_DENSE_LIMIT: usize = 3000;

/// Iterates `T_+^1 … T_+^k` of the relaxed block Gauss–Seidel recurrence
///
/// ```text
/// K_− T_−^{k+1}       = f_− − D T_+^k
/// (1/θ) K_+ T_+^{k+1} = f_+ − S T_−^{k+1} + ((1 − θ)/θ) K_+ T_+^k
/// ```
///
/// solved with dense LU factorizations. Intended as an oracle on small meshes.
pub fn block_gauss_seidel<T: Real>(ops: &CoupledOperators<T>, theta: T, t0: &[T], k: usize) -> Result<Vec<Vec<T>>> {
    let (np, nm) = (ops.n_plus(), ops.n_minus());
    let kp = DenseMatrix::from_row_major(np, np, ops.k_plus.to_dense());
    let mut kp_theta = kp.clone();
    for i in 0..np {
        for j in 0..np {
            kp_theta[(i, j)] /= theta;
        }
    }
    let lu_plus = kp_theta.lu()?;
    let lu_minus = DenseMatrix::from_row_major(nm, nm, ops.k_minus.to_dense()).lu()?;
    let w = (T::one() - theta) / theta;
    let mut t = t0.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let dt = ops.d.mul_vec(&t);
        let rhs_m: Vec<T> = ops.f_minus.iter().zip(&dt).map(|(&f, &v)| f - v).collect();
        let tm = lu_minus.solve(&rhs_m);
        let st = ops.s.mul_vec(&tm);
        let kt = kp.mul_vec(&t);
        let rhs_p: Vec<T> = (0..np).map(|i| ops.f_plus[i] - st[i] + w * kt[i]).collect();
        t = lu_plus.solve(&rhs_p);
        out.push(t.clone());
    }
    Ok(out)
}

/// `Σ_{j<k} M^j c + M^k T_+^0` with `c = K_+⁻¹ (f_+ − S K_−⁻¹ f_−)` and
/// `M = K_+⁻¹ S K_−⁻¹ D`: the `k`-th unrelaxed iterate in closed form.
pub fn neumann_partial_sum<T: Real>(solver: &TwoLevelSolver<'_, T>, k: usize, t0: &[T]) -> Result<Vec<T>> {
    if k == 0 {
        return Err(Error::InvalidConfig("partial sums start at k = 1".into()));
    }
    let c = solver.affine_term()?;
    let mut sum = vec![T::zero(); c.len()];
    let mut term = c;
    for j in 0..k {
        for (s, &v) in sum.iter_mut().zip(&term) {
            *s += v;
        }
        if j + 1 < k {
            term = solver.apply_iteration_operator(&term)?;
        }
    }
    let mut tail = t0.to_vec();
    for _ in 0..k {
        tail = solver.apply_iteration_operator(&tail)?;
    }
    for (s, v) in sum.iter_mut().zip(tail) {
        *s += v;
    }
    Ok(sum)
}

/// Monolithic solution of the block system. Small systems use dense LU of the
/// full block matrix; larger ones use GMRES on the Schur complement
/// `(I − M) T_+ = K_+⁻¹ (f_+ − S K_−⁻¹ f_−)`, i.e. `K_+ − S K_−⁻¹ D`
/// preconditioned by `K_+`.
pub fn run_coupled_direct<T: Real>(ops: &CoupledOperators<T>) -> Result<(Vec<T>, Vec<T>)> {
    if ops.n_plus() + ops.n_minus() <= COUPLED_DENSE_LIMIT {
        run_coupled_dense(ops)
    } else {
        run_coupled_schur(ops, T::lit(1e-13))
    }
}

/// Dense LU of the full `(n_+ + n_−)` block system.
pub fn run_coupled_dense<T: Real>(ops: &CoupledOperators<T>) -> Result<(Vec<T>, Vec<T>)> {
    let a = ops.block_matrix();
    let n = a.nrows();
    if n > 2 * COUPLED_DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: 2 * COUPLED_DENSE_LIMIT });
    }
    let lu = DenseMatrix::from_row_major(n, n, a.to_dense()).lu()?;
    let mut b = ops.f_plus.clone();
    b.extend_from_slice(&ops.f_minus);
    let x = lu.solve(&b);
    let np = ops.n_plus();
    Ok((x[..np].to_vec(), x[np..].to_vec()))
}

/// Schur-complement GMRES with direct inner solves.
pub fn run_coupled_schur<T: Real>(ops: &CoupledOperators<T>, rel_tol: T) -> Result<(Vec<T>, Vec<T>)> {
    let solver = TwoLevelSolver::new(ops, &SolverConfig::direct())?;
    let c = solver.affine_term()?;
    let (t_plus, _) = gmres_with(
        |v: &[T]| {
            let mv = solver.apply_iteration_operator(v)?;
            Ok(v.iter().zip(mv).map(|(&a, b)| a - b).collect())
        },
        |v: &[T]| Ok(v.to_vec()),
        &c,
        Some(&c),
        rel_tol,
        2000,
        200,
    )?;
    let t_minus = solver.local_step(&t_plus)?;
    Ok((t_plus, t_minus))
}

/// Mesh used by the fitted monolithic reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefinementMode {
    /// Uniform spacing `h_−` everywhere.
    UniformFine,
    /// `h_+` in the bulk, `h_−` in the strip, conforming transition rows (2D only).
    Graded,
}

/// Conforming mesh of the whole box resolving the strip interface.
pub fn build_fitted_mesh<T: Real>(
    geom: &GeometryConfig<T>,
    h_plus: T,
    h_minus: T,
    mode: RefinementMode,
) -> Result<StructuredMesh<T>> {
    match mode {
        RefinementMode::UniformFine => build_uniform_fitted_mesh(geom, h_minus),
        RefinementMode::Graded => build_graded_fitted_mesh(geom, h_plus, h_minus),
    }
}

/// Per-cell coefficient: `kappa_b` for cells whose centroid lies in the strip.
pub fn strip_coefficients<T: Real>(mesh: &StructuredMesh<T>, geom: &GeometryConfig<T>, kappa_a: T, kappa_b: T) -> Vec<T> {
    (0..mesh.n_cells())
        .map(|c| if geom.in_strip(&mesh.cell_centroid(c)) { kappa_b } else { kappa_a })
        .collect()
}

/// A finite element field on a single mesh.
#[derive(Clone, Debug)]
pub struct FittedSolution<T> {
    pub mesh: StructuredMesh<T>,
    pub dofs: DofMap<T>,
    pub values: Vec<T>,
    pub solver_iterations: usize,
    pub time_s: f64,
}

impl<T: Real> FittedSolution<T> {
    pub fn eval(&self, x: &Point<T>) -> Result<T> {
        eval_field(&self.mesh, &self.dofs, &self.values, x)
    }
}

/// Solve `−∇·(κ∇T) = f`, `κ ∂T/∂n = q` on the top, `T = T_D` elsewhere on
/// the boundary, on a single mesh.
pub fn solve_fitted<T: Real>(
    mesh: StructuredMesh<T>,
    degree: usize,
    kappa: Coefficient<'_, T>,
    problem: &ProblemData<'_, T>,
    solver: &SolverConfig,
) -> Result<FittedSolution<T>> {
    let start = Instant::now();
    let dofs = build_dofmap(&mesh, degree)?;
    let k = assemble_stiffness(&mesh, &dofs, kappa)?;
    let mut b = assemble_load(&mesh, &dofs, |x| (problem.source)(x), |x| (problem.flux)(x));
    let dir = dofs.dofs_with_tag(&mesh, FacetTag::DirichletOuter);
    let k = apply_dirichlet(&k, &mut b, &dir, problem.t_dirichlet)?;
    let (values, solver_iterations) = Factor::new(&k, solver)?.solve(&b)?;
    Ok(FittedSolution { mesh, dofs, values, solver_iterations, time_s: start.elapsed().as_secs_f64() })
}

/// Monolithic reference on a fitted mesh with `κ_A` outside and `κ_B` inside
/// the strip.
#[allow(clippy::too_many_arguments)]
pub fn run_fitted_reference<T: Real>(
    geom: &GeometryConfig<T>,
    h_plus: T,
    h_minus: T,
    kappa_a: T,
    kappa_b: T,
    degree: usize,
    mode: RefinementMode,
    problem: &ProblemData<'_, T>,
    solver: &SolverConfig,
) -> Result<FittedSolution<T>> {
    let mesh = build_fitted_mesh(geom, h_plus, h_minus, mode)?;
    let kappa = strip_coefficients(&mesh, geom, kappa_a, kappa_b);
    solve_fitted(mesh, degree, Coefficient::PerCell(&kappa), problem, solver)
}

/// Evaluate a finite element field at a point.
pub fn eval_field<T: Real>(mesh: &StructuredMesh<T>, dofs: &DofMap<T>, values: &[T], x: &Point<T>) -> Result<T> {
    let loc = mesh.locate_point_search(x)?;
    let phi = eval_basis(mesh.dim(), dofs.degree(), &loc.barycentric);
    Ok(dofs.cell_dofs(loc.cell_index).iter().zip(&phi).fold(T::zero(), |s, (&d, &p)| s + values[d] * p))
}

/// The two-level solution as one field: `T_−` in the strip, `T_+` elsewhere.
pub fn eval_two_level<T: Real>(disc: &Discretization<T>, t_plus: &[T], t_minus: &[T], x: &Point<T>) -> Result<T> {
    if disc.geom.in_strip(x) {
        eval_field(&disc.local_mesh, &disc.local_dofs, t_minus, x)
    } else {
        eval_field(&disc.global_mesh, &disc.global_dofs, t_plus, x)
    }
}

/// `(∫ (u_h − g)²)^{1/2}` over `mesh`, with `g` evaluated pointwise.
pub fn l2_distance<T: Real>(
    mesh: &StructuredMesh<T>,
    dofs: &DofMap<T>,
    values: &[T],
    other: impl Fn(&Point<T>) -> Result<T>,
) -> Result<T> {
    let dim = mesh.dim();
    let m = dofs.degree();
    let rule = QuadratureRule::<T>::simplex(dim, 2 * m + 2);
    let mut acc = T::zero();
    for c in 0..mesh.n_cells() {
        let jac = mesh.cell_geometry(c).det.abs();
        let cell = mesh.cell(c);
        let cd = dofs.cell_dofs(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let mut x = [T::zero(); 3];
            for (k, &v) in cell.iter().enumerate() {
                for a in 0..3 {
                    x[a] += p[k] * mesh.vertices()[v][a];
                }
            }
            let phi = eval_basis(dim, m, p);
            let uh = cd.iter().zip(&phi).fold(T::zero(), |s, (&d, &v)| s + values[d] * v);
            let e = uh - other(&x)?;
            acc += w * jac * e * e;
        }
    }
    Ok(acc.sqrt())
}

/// Per-dof CSV with header `dof,x,y[,z],value`.
pub fn write_solution_csv<T: Real, W: Write>(w: W, dofs: &DofMap<T>, values: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let dim = dofs.dim();
    let mut header = vec!["dof", "x", "y"];
    if dim == 3 {
        header.push("z");
    }
    header.push("value");
    wr.write_record(&header)?;
    for (i, (x, v)) in dofs.dof_coords().iter().zip(values).enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(x[..dim].iter().map(|c| format!("{:e}", c.to_f64_lossy())));
        rec.push(format!("{:e}", v.to_f64_lossy()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
