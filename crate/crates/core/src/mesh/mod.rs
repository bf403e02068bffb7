//! Simplicial meshes of the global box and the local top strip.
//!
//! Meshes are built from a uniform tensor grid whose cells are split into
//! simplices along a fixed diagonal (2 triangles per square, 6 Kuhn
//! tetrahedra per cube). The vertical axis is the last coordinate: `y` in 2D,
//! `z` in 3D.

mod graded;
mod structured;

pub use graded::build_graded_fitted_mesh;
pub use structured::{build_box_mesh, build_global_mesh, build_local_mesh, build_uniform_fitted_mesh};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Point, Real};

/// Box dimensions of the global domain and thickness of the local strip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig<T> {
    pub dim: usize,
    /// Extent along `x`.
    pub length: T,
    /// Vertical extent.
    pub height: T,
    /// Extent along `y` (3D only).
    pub width: T,
    /// Thickness of the local strip at the top of the box.
    pub strip: T,
}

impl<T: Real> GeometryConfig<T> {
    /// The standard square/cube test configuration: `L = H (= W) = 1/40`,
    /// strip thickness `1/160`.
    pub fn standard(dim: usize) -> Self {
        Self {
            dim,
            length: T::lit(1.0 / 40.0),
            height: T::lit(1.0 / 40.0),
            width: T::lit(1.0 / 40.0),
            strip: T::lit(1.0 / 160.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidGeometry(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(self.length > T::zero() && self.height > T::zero()) {
            return Err(Error::InvalidGeometry("length and height must be positive".into()));
        }
        if self.dim == 3 && !(self.width > T::zero()) {
            return Err(Error::InvalidGeometry("width must be positive in 3D".into()));
        }
        if !(self.strip > T::zero() && self.strip < self.height) {
            return Err(Error::InvalidGeometry(format!(
                "strip thickness {} must lie in (0, {})",
                self.strip, self.height
            )));
        }
        Ok(())
    }

    /// Vertical coordinate of the interface between the strip and the rest of the box.
    pub fn interface_level(&self) -> T {
        self.height - self.strip
    }

    /// Whether a point lies in the closed local strip.
    pub fn in_strip(&self, x: &Point<T>) -> bool {
        x[self.dim - 1] >= self.interface_level()
    }

    /// Measure of the interface (length in 2D, area in 3D).
    pub fn interface_measure(&self) -> T {
        if self.dim == 2 {
            self.length
        } else {
            self.length * self.width
        }
    }

    pub(crate) fn extents(&self) -> Vec<T> {
        if self.dim == 2 {
            vec![self.length, self.height]
        } else {
            vec![self.length, self.width, self.height]
        }
    }
}

/// Boundary condition tag carried by every boundary facet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FacetTag {
    DirichletOuter,
    NeumannTop,
    InterfaceGamma,
}

impl FacetTag {
    pub fn code(self) -> u8 {
        match self {
            FacetTag::DirichletOuter => 0,
            FacetTag::NeumannTop => 1,
            FacetTag::InterfaceGamma => 2,
        }
    }
}

/// A boundary facet together with the unique cell it bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub vertices: Vec<usize>,
    pub tag: FacetTag,
    pub cell: usize,
}

/// Uniform tensor grid underlying a structured mesh; enables index-based
/// point location.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub origin: Point<T>,
    pub spacing: Point<T>,
    pub counts: [usize; 3],
}

impl<T: Real> Grid<T> {
    pub(crate) fn simplices_per_cube(dim: usize) -> usize {
        if dim == 2 {
            2
        } else {
            6
        }
    }
}

/// Simplicial mesh with tagged boundary facets.
#[derive(Clone, Debug)]
pub struct StructuredMesh<T> {
    pub(crate) dim: usize,
    pub(crate) vertices: Vec<Point<T>>,
    pub(crate) cells: Vec<usize>,
    pub(crate) boundary_facets: Vec<BoundaryFacet>,
    pub(crate) h: T,
    pub(crate) grid: Option<Grid<T>>,
}

/// Cell containing a point plus the point's barycentric coordinates in it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLocation<T> {
    pub cell_index: usize,
    /// Only the first `dim + 1` entries are meaningful.
    pub barycentric: [T; 4],
}

/// Affine data of one simplex: `x = p0 + J λ'`, with `inv = J⁻¹`.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry<T> {
    pub p0: Point<T>,
    pub inv: [[T; 3]; 3],
    pub det: T,
    pub dim: usize,
}

impl<T: Real> CellGeometry<T> {
    /// Barycentric coordinates of `x` (first `dim + 1` entries).
    pub fn barycentric(&self, x: &Point<T>) -> [T; 4] {
        let mut lam = [T::zero(); 4];
        let mut sum = T::zero();
        for r in 0..self.dim {
            let mut acc = T::zero();
            for c in 0..self.dim {
                acc += self.inv[r][c] * (x[c] - self.p0[c]);
            }
            lam[r + 1] = acc;
            sum += acc;
        }
        lam[0] = T::one() - sum;
        lam
    }

    /// Gradients of the barycentric coordinates, one row per vertex.
    pub fn barycentric_gradients(&self) -> [[T; 3]; 4] {
        let mut g = [[T::zero(); 3]; 4];
        for i in 0..self.dim {
            for c in 0..self.dim {
                g[i + 1][c] = self.inv[i][c];
                g[0][c] -= self.inv[i][c];
            }
        }
        g
    }

    /// Volume (area in 2D) of the simplex.
    pub fn volume(&self) -> T {
        let fact = if self.dim == 2 { T::lit(2.0) } else { T::lit(6.0) };
        self.det.abs() / fact
    }
}

impl<T: Real> StructuredMesh<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn facets_with_tag(&self, tag: FacetTag) -> Vec<BoundaryFacet> {
        self.boundary_facets.iter().filter(|f| f.tag == tag).cloned().collect()
    }

    /// Nominal cell size (grid spacing used for construction).
    pub fn h(&self) -> T {
        self.h
    }

    pub fn grid(&self) -> Option<&Grid<T>> {
        self.grid.as_ref()
    }

    pub fn cell_geometry(&self, c: usize) -> CellGeometry<T> {
        let verts = self.cell(c);
        let p0 = self.vertices[verts[0]];
        let d = self.dim;
        let mut jac = [[T::zero(); 3]; 3];
        for (col, &v) in verts[1..].iter().enumerate() {
            let p = self.vertices[v];
            for r in 0..d {
                jac[r][col] = p[r] - p0[r];
            }
        }
        let (inv, det) = invert(&jac, d);
        CellGeometry { p0, inv, det, dim: d }
    }

    pub fn cell_volume(&self, c: usize) -> T {
        self.cell_geometry(c).volume()
    }

    pub fn cell_centroid(&self, c: usize) -> Point<T> {
        let verts = self.cell(c);
        let mut x = [T::zero(); 3];
        for &v in verts {
            for (a, xa) in x.iter_mut().enumerate() {
                *xa += self.vertices[v][a];
            }
        }
        let n = T::from_usize_lossy(verts.len());
        x.map(|xa| xa / n)
    }

    /// Measure (length or area) of a facet given by its vertices.
    pub fn facet_measure(&self, verts: &[usize]) -> T {
        let p = |i: usize| self.vertices[verts[i]];
        if self.dim == 2 {
            let (a, b) = (p(0), p(1));
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
        } else {
            let (a, b, c) = (p(0), p(1), p(2));
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = cross(&u, &v);
            (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() / T::lit(2.0)
        }
    }

    /// Unit normal of a boundary facet pointing out of its cell.
    pub fn facet_outward_normal(&self, facet: &BoundaryFacet) -> Point<T> {
        let p = |i: usize| self.vertices[facet.vertices[i]];
        let mut n = if self.dim == 2 {
            let (a, b) = (p(0), p(1));
            [b[1] - a[1], a[0] - b[0], T::zero()]
        } else {
            let (a, b, c) = (p(0), p(1), p(2));
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            cross(&u, &v)
        };
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        for x in n.iter_mut() {
            *x /= len;
        }
        let opposite = self
            .cell(facet.cell)
            .iter()
            .copied()
            .find(|v| !facet.vertices.contains(v))
            .expect("facet cell has an opposite vertex");
        let a = p(0);
        let q = self.vertices[opposite];
        let s: T = (0..3).map(|k| (q[k] - a[k]) * n[k]).sum();
        if s > T::zero() {
            for x in n.iter_mut() {
                *x = -*x;
            }
        }
        n
    }

    /// Locate `x` using structured index arithmetic.
    ///
    /// Points on shared facets resolve to the lowest-index containing cell.
    pub fn locate_point(&self, x: &Point<T>) -> Result<PointLocation<T>> {
        let grid = self.grid.as_ref().ok_or(Error::NotStructured)?;
        let d = self.dim;
        let abs_tol = T::lit(1e-12);
        let snap = T::lit(1e-9);
        let mut axis_candidates: Vec<Vec<usize>> = Vec::with_capacity(d);
        for a in 0..d {
            let n = grid.counts[a];
            let extent = grid.spacing[a] * T::from_usize_lossy(n);
            let rel = x[a] - grid.origin[a];
            if rel < -abs_tol * extent.max(T::one()) || rel > extent + abs_tol * extent.max(T::one()) {
                return Err(Error::OutOfDomain(x.map(|v| v.to_f64_lossy())));
            }
            let t = rel / grid.spacing[a];
            let r = t.round();
            let mut cands = Vec::with_capacity(2);
            if (t - r).abs() <= snap {
                let ri = r.to_f64_lossy() as isize;
                for k in [ri - 1, ri] {
                    if k >= 0 && (k as usize) < n {
                        cands.push(k as usize);
                    }
                }
            } else {
                let f = t.floor().to_f64_lossy() as isize;
                cands.push(f.clamp(0, n as isize - 1) as usize);
            }
            axis_candidates.push(cands);
        }
        let per = Grid::<T>::simplices_per_cube(d);
        let mut cells = Vec::new();
        let zk = if d == 3 { axis_candidates[2].clone() } else { vec![0] };
        for &k in &zk {
            for &j in &axis_candidates[1] {
                for &i in &axis_candidates[0] {
                    let cube = i + grid.counts[0] * (j + grid.counts[1] * k);
                    cells.extend((0..per).map(|s| cube * per + s));
                }
            }
        }
        cells.sort_unstable();
        let tol = T::lit(-1e-12);
        let mut best: Option<(T, usize, [T; 4])> = None;
        for &c in &cells {
            let lam = self.cell_geometry(c).barycentric(x);
            let min = lam[..=d].iter().copied().fold(T::infinity(), T::min);
            if min >= tol {
                return Ok(PointLocation { cell_index: c, barycentric: lam });
            }
            if best.is_none_or(|(m, _, _)| min > m) {
                best = Some((min, c, lam));
            }
        }
        // Roundoff only: clamp the closest candidate back onto the simplex.
        let (_, c, mut lam) = best.expect("at least one candidate cell");
        let mut s = T::zero();
        for l in lam[..=d].iter_mut() {
            *l = l.max(T::zero());
            s += *l;
        }
        for l in lam[..=d].iter_mut() {
            *l /= s;
        }
        Ok(PointLocation { cell_index: c, barycentric: lam })
    }

    /// Locate `x` by scanning every cell; works on unstructured (graded) meshes.
    pub fn locate_point_search(&self, x: &Point<T>) -> Result<PointLocation<T>> {
        if self.grid.is_some() {
            return self.locate_point(x);
        }
        let d = self.dim;
        let mut best: Option<(T, usize, [T; 4])> = None;
        for c in 0..self.n_cells() {
            let lam = self.cell_geometry(c).barycentric(x);
            let min = lam[..=d].iter().copied().fold(T::infinity(), T::min);
            if min >= T::lit(-1e-12) {
                return Ok(PointLocation { cell_index: c, barycentric: lam });
            }
            if best.is_none_or(|(m, _, _)| min > m) {
                best = Some((min, c, lam));
            }
        }
        match best {
            Some((m, c, lam)) if m > T::lit(-1e-8) => Ok(PointLocation { cell_index: c, barycentric: lam }),
            _ => Err(Error::OutOfDomain(x.map(|v| v.to_f64_lossy()))),
        }
    }

    /// The interface facets of a local mesh with their outward normals.
    pub fn interface_facets(&self) -> Vec<(BoundaryFacet, Point<T>)> {
        self.boundary_facets
            .iter()
            .filter(|f| f.tag == FacetTag::InterfaceGamma)
            .map(|f| (f.clone(), self.facet_outward_normal(f)))
            .collect()
    }

    /// Total volume of all cells.
    pub fn total_volume(&self) -> T {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    /// Plain-text dump: `dim / nv / vertex lines / nc / cell lines / nb / facet+tag lines`.
    pub fn write_dump<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.dim)?;
        writeln!(w, "{}", self.vertices.len())?;
        for v in &self.vertices {
            let coords: Vec<String> = v[..self.dim].iter().map(|x| format!("{:.17e}", x.to_f64_lossy())).collect();
            writeln!(w, "{}", coords.join(" "))?;
        }
        writeln!(w, "{}", self.n_cells())?;
        for c in self.cells() {
            let s: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{}", s.join(" "))?;
        }
        writeln!(w, "{}", self.boundary_facets.len())?;
        for f in &self.boundary_facets {
            let s: Vec<String> = f.vertices.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{} {}", s.join(" "), f.tag.code())?;
        }
        Ok(())
    }
}

pub(crate) fn cross<T: Real>(u: &[T; 3], v: &[T; 3]) -> [T; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

/// Inverse and determinant of the leading `d × d` block.
pub(crate) fn invert<T: Real>(m: &[[T; 3]; 3], d: usize) -> ([[T; 3]; 3], T) {
    let mut inv = [[T::zero(); 3]; 3];
    if d == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        inv[0][0] = m[1][1] / det;
        inv[0][1] = -m[0][1] / det;
        inv[1][0] = -m[1][0] / det;
        inv[1][1] = m[0][0] / det;
        (inv, det)
    } else {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
        inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
        inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        (inv, det)
    }
}
