use super::basis::{self, MAX_LOCAL};
use super::dofmap::DofMap;
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryFacet, FacetTag, StructuredMesh};
use crate::scalar::{Point, Real};

/// Refinement levels of the composite facet rule used for Neumann data, which
/// may be sharply peaked relative to the facet size.
pub const NEUMANN_LEVELS_2D: u32 = 8;
pub const NEUMANN_LEVELS_3D: u32 = 4;

/// Diffusion coefficient: one value everywhere or one value per cell.
#[derive(Clone, Copy, Debug)]
pub enum Coefficient<'a, T> {
    Constant(T),
    PerCell(&'a [T]),
}

impl<T: Real> Coefficient<'_, T> {
    #[inline]
    pub fn at(&self, cell: usize) -> T {
        match self {
            Coefficient::Constant(k) => *k,
            Coefficient::PerCell(v) => v[cell],
        }
    }

    fn validate(&self, n_cells: usize) -> Result<()> {
        match self {
            Coefficient::Constant(k) if !(*k > T::zero()) => Err(Error::NonpositiveCoefficient(k.to_f64_lossy())),
            Coefficient::PerCell(v) if v.len() != n_cells => Err(Error::DimensionMismatch(format!(
                "{} coefficients for {n_cells} cells",
                v.len()
            ))),
            Coefficient::PerCell(v) => match v.iter().find(|k| !(**k > T::zero())) {
                Some(k) => Err(Error::NonpositiveCoefficient(k.to_f64_lossy())),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Cell barycentrics, physical point and physical weight.
pub(crate) type FacetPoint<T> = ([T; 4], Point<T>, T);

/// Quadrature points of a facet rule expressed as barycentric coordinates of
/// the facet's cell, with physical weights.
pub(crate) fn facet_points_in_cell<T: Real>(
    mesh: &StructuredMesh<T>,
    facet: &BoundaryFacet,
    rule: &QuadratureRule<T>,
) -> Result<Vec<FacetPoint<T>>> {
    let cell = check_facet(mesh, facet)?;
    let slots: Vec<usize> = facet
        .vertices
        .iter()
        .map(|v| cell.iter().position(|c| c == v).expect("checked above"))
        .collect();
    let scale = mesh.facet_measure(&facet.vertices) / QuadratureRule::<T>::reference_measure(rule.dim);
    let pts = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(p, &w)| {
            let mut lam = [T::zero(); 4];
            let mut x = [T::zero(); 3];
            for (k, &slot) in slots.iter().enumerate() {
                lam[slot] = p[k];
                let v = mesh.vertices()[facet.vertices[k]];
                for a in 0..3 {
                    x[a] += p[k] * v[a];
                }
            }
            (lam, x, w * scale)
        })
        .collect();
    Ok(pts)
}

fn check_facet<'m, T: Real>(mesh: &'m StructuredMesh<T>, facet: &BoundaryFacet) -> Result<&'m [usize]> {
    if facet.cell >= mesh.n_cells() || facet.vertices.len() != mesh.dim() {
        return Err(Error::ForeignFacet(facet.cell));
    }
    let cell = mesh.cell(facet.cell);
    if facet.vertices.iter().any(|v| !cell.contains(v)) {
        return Err(Error::ForeignFacet(facet.cell));
    }
    Ok(cell)
}

fn physical_point<T: Real>(mesh: &StructuredMesh<T>, cell: &[usize], lam: &[T; 4]) -> Point<T> {
    let mut x = [T::zero(); 3];
    for (k, &v) in cell.iter().enumerate() {
        let p = mesh.vertices()[v];
        for a in 0..3 {
            x[a] += lam[k] * p[a];
        }
    }
    x
}

/// `∫ κ ∇φ_j · ∇φ_i` with the dof numbering of `dofmap`.
pub fn assemble_stiffness<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    kappa: Coefficient<'_, T>,
) -> Result<SparseMatrix<T>> {
    kappa.validate(mesh.n_cells())?;
    let dim = mesh.dim();
    let m = dofmap.degree();
    let nl = dofmap.n_local();
    let rule = QuadratureRule::<T>::simplex(dim, 2 * m);
    let n = dofmap.n_dofs();
    let mut b = TripletBuilder::with_capacity(n, n, mesh.n_cells() * nl * nl);
    let mut ke = [[T::zero(); MAX_LOCAL]; MAX_LOCAL];
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        let g = geo.barycentric_gradients();
        let jac = geo.det.abs();
        for row in ke.iter_mut().take(nl) {
            row[..nl].fill(T::zero());
        }
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let gr = basis::grad(dim, m, p, &g);
            let wq = w * jac;
            for i in 0..nl {
                for j in 0..nl {
                    let mut s = T::zero();
                    for a in 0..dim {
                        s += gr[i][a] * gr[j][a];
                    }
                    ke[i][j] += wq * s;
                }
            }
        }
        let k = kappa.at(c);
        let dofs = dofmap.cell_dofs(c);
        for i in 0..nl {
            for j in 0..nl {
                b.push(dofs[i], dofs[j], k * ke[i][j]);
            }
        }
    }
    Ok(b.build())
}

/// Volume mass matrix `∫ φ_j φ_i`.
pub fn assemble_mass<T: Real>(mesh: &StructuredMesh<T>, dofmap: &DofMap<T>) -> SparseMatrix<T> {
    let dim = mesh.dim();
    let m = dofmap.degree();
    let nl = dofmap.n_local();
    let rule = QuadratureRule::<T>::simplex(dim, 2 * m);
    let n = dofmap.n_dofs();
    let mut b = TripletBuilder::with_capacity(n, n, mesh.n_cells() * nl * nl);
    for c in 0..mesh.n_cells() {
        let jac = mesh.cell_geometry(c).det.abs();
        let dofs = dofmap.cell_dofs(c);
        let mut me = [[T::zero(); MAX_LOCAL]; MAX_LOCAL];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let phi = basis::eval(dim, m, p);
            for i in 0..nl {
                for j in 0..nl {
                    me[i][j] += w * jac * phi[i] * phi[j];
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                b.push(dofs[i], dofs[j], me[i][j]);
            }
        }
    }
    b.build()
}

/// `weight × ∫_F φ_j φ_i` summed over the given boundary facets.
pub fn assemble_boundary_mass<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    facets: &[BoundaryFacet],
    weight: T,
) -> Result<SparseMatrix<T>> {
    let dim = mesh.dim();
    let m = dofmap.degree();
    let nl = dofmap.n_local();
    let rule = QuadratureRule::<T>::simplex(dim - 1, 2 * m + 1);
    let n = dofmap.n_dofs();
    let mut b = TripletBuilder::new(n, n);
    for f in facets {
        let pts = facet_points_in_cell(mesh, f, &rule)?;
        let dofs = dofmap.cell_dofs(f.cell);
        let mut me = [[T::zero(); MAX_LOCAL]; MAX_LOCAL];
        for (lam, _, w) in &pts {
            let phi = basis::eval(dim, m, lam);
            for i in 0..nl {
                for j in 0..nl {
                    me[i][j] += *w * phi[i] * phi[j];
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                if me[i][j] != T::zero() {
                    b.push(dofs[i], dofs[j], weight * me[i][j]);
                }
            }
        }
    }
    Ok(b.build())
}

/// `∫ f φ_i` with a volume rule exact to `degree`.
pub fn assemble_volume_load<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    f: impl Fn(&Point<T>) -> T,
    degree: usize,
) -> Vec<T> {
    let dim = mesh.dim();
    let m = dofmap.degree();
    let nl = dofmap.n_local();
    let rule = QuadratureRule::<T>::simplex(dim, degree);
    let mut out = vec![T::zero(); dofmap.n_dofs()];
    for c in 0..mesh.n_cells() {
        let jac = mesh.cell_geometry(c).det.abs();
        let cell = mesh.cell(c);
        let dofs = dofmap.cell_dofs(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = physical_point(mesh, cell, p);
            let fx = f(&x) * w * jac;
            if fx == T::zero() {
                continue;
            }
            let phi = basis::eval(dim, m, p);
            for i in 0..nl {
                out[dofs[i]] += fx * phi[i];
            }
        }
    }
    out
}

/// `∫_F g φ_i` over `facets`; `g` receives the facet's position in the slice
/// and the physical point. The facet rule (exact to `2m + 1`) is applied on a
/// `2^levels` uniform subdivision of each facet.
pub fn assemble_facet_load<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    facets: &[BoundaryFacet],
    levels: u32,
    g: impl Fn(usize, &Point<T>) -> T,
) -> Result<Vec<T>> {
    let dim = mesh.dim();
    let m = dofmap.degree();
    let nl = dofmap.n_local();
    let rule = QuadratureRule::<T>::composite(dim - 1, 2 * m + 1, levels);
    let mut out = vec![T::zero(); dofmap.n_dofs()];
    for (k, f) in facets.iter().enumerate() {
        let dofs = dofmap.cell_dofs(f.cell);
        for (lam, x, w) in facet_points_in_cell(mesh, f, &rule)? {
            let gx = g(k, &x) * w;
            if gx == T::zero() {
                continue;
            }
            let phi = basis::eval(dim, m, &lam);
            for i in 0..nl {
                out[dofs[i]] += gx * phi[i];
            }
        }
    }
    Ok(out)
}

/// Default refinement for Neumann facet loads.
pub fn neumann_levels(dim: usize) -> u32 {
    if dim == 2 {
        NEUMANN_LEVELS_2D
    } else {
        NEUMANN_LEVELS_3D
    }
}

/// `∫ f φ_i + ∫_{Γ_N} q φ_i`, with `Γ_N` the facets tagged `NeumannTop`.
pub fn assemble_load<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    f: impl Fn(&Point<T>) -> T,
    q: impl Fn(&Point<T>) -> T,
) -> Vec<T> {
    let mut out = assemble_volume_load(mesh, dofmap, f, 2 * dofmap.degree() + 2);
    let top = mesh.facets_with_tag(FacetTag::NeumannTop);
    let qv = assemble_facet_load(mesh, dofmap, &top, neumann_levels(mesh.dim()), |_, x| q(x))
        .expect("mesh facets belong to the mesh");
    for (o, v) in out.iter_mut().zip(qv) {
        *o += v;
    }
    out
}

/// Symmetric strong elimination of `x[d] = value` for every `d` in `dofs`:
/// constrained rows and columns are replaced by the identity and the known
/// column contributions move to the right-hand side.
pub fn apply_dirichlet<T: Real>(
    a: &SparseMatrix<T>,
    b: &mut [T],
    dofs: &[usize],
    value: T,
) -> Result<SparseMatrix<T>> {
    let n = a.nrows();
    let mut fixed = vec![false; n];
    for &d in dofs {
        if d >= n {
            return Err(Error::IndexOutOfRange { index: d, len: n });
        }
        fixed[d] = true;
    }
    let mut out = TripletBuilder::with_capacity(n, a.ncols(), a.nnz());
    for i in 0..n {
        if fixed[i] {
            out.push(i, i, T::one());
            b[i] = value;
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if fixed[j] {
                b[i] -= v * value;
            } else {
                out.push(i, j, v);
            }
        }
    }
    Ok(out.build())
}

/// Value of a finite element field at a point of the mesh.
pub fn evaluate_field<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    coeffs: &[T],
    x: &Point<T>,
) -> Result<T> {
    let loc = mesh.locate_point_search(x)?;
    let phi = basis::eval(mesh.dim(), dofmap.degree(), &loc.barycentric);
    Ok(dofmap
        .cell_dofs(loc.cell_index)
        .iter()
        .zip(&phi)
        .fold(T::zero(), |acc, (&d, &p)| acc + coeffs[d] * p))
}

/// `‖u_h − u‖_{L²}` with a volume rule exact to `degree`.
pub fn l2_error<T: Real>(
    mesh: &StructuredMesh<T>,
    dofmap: &DofMap<T>,
    coeffs: &[T],
    exact: impl Fn(&Point<T>) -> T,
    degree: usize,
) -> T {
    let dim = mesh.dim();
    let m = dofmap.degree();
    let rule = QuadratureRule::<T>::simplex(dim, degree);
    let mut acc = T::zero();
    for c in 0..mesh.n_cells() {
        let jac = mesh.cell_geometry(c).det.abs();
        let cell = mesh.cell(c);
        let dofs = dofmap.cell_dofs(c);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let phi = basis::eval(dim, m, p);
            let uh = dofs.iter().zip(&phi).fold(T::zero(), |s, (&d, &v)| s + coeffs[d] * v);
            let e = uh - exact(&physical_point(mesh, cell, p));
            acc += w * jac * e * e;
        }
    }
    acc.sqrt()
}
