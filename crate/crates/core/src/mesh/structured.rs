use std::collections::HashMap;

use super::{BoundaryFacet, FacetTag, GeometryConfig, Grid, StructuredMesh};
use crate::error::{Error, Result};
use crate::scalar::{Point, Real};

/// Kuhn split of the unit cube: each tetrahedron follows a monotone path
/// from corner 000 to 111, one axis permutation per simplex.
const KUHN_PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Number of grid cells of size `h` spanning `extent`.
fn tile_count<T: Real>(extent: T, h: T) -> Result<usize> {
    if !(h > T::zero()) {
        return Err(Error::InvalidGeometry(format!("spacing must be positive, got {h}")));
    }
    let n = extent / h;
    let r = n.round();
    if r < T::one() || (n - r).abs() > T::lit(1e-12) * n.max(T::one()) {
        return Err(Error::NonDivisibleSpacing { spacing: h.to_f64_lossy(), extent: extent.to_f64_lossy() });
    }
    Ok(r.to_f64_lossy() as usize)
}

/// Mesh of the axis-aligned box `[lo, hi]` with `counts` grid cells per axis.
///
/// `tagger` receives the facet vertex coordinates and returns its tag.
pub fn build_box_mesh<T: Real>(
    dim: usize,
    lo: Point<T>,
    hi: Point<T>,
    counts: [usize; 3],
    h: T,
    tagger: impl Fn(&[Point<T>]) -> FacetTag,
) -> StructuredMesh<T> {
    let nx = counts[0];
    let ny = counts[1];
    let nz = if dim == 3 { counts[2] } else { 1 };
    let spacing = {
        let mut s = [T::zero(); 3];
        for a in 0..dim {
            s[a] = (hi[a] - lo[a]) / T::from_usize_lossy(counts[a]);
        }
        s
    };
    let coord = |a: usize, i: usize| -> T {
        if i == counts[a] {
            hi[a]
        } else {
            lo[a] + T::from_usize_lossy(i) * spacing[a]
        }
    };

    let mut vertices = Vec::new();
    let nzv = if dim == 3 { nz + 1 } else { 1 };
    for k in 0..nzv {
        for j in 0..=ny {
            for i in 0..=nx {
                let z = if dim == 3 { coord(2, k) } else { T::zero() };
                vertices.push([coord(0, i), coord(1, j), z]);
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let mut cells = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if dim == 2 {
                    let v00 = vid(i, j, 0);
                    let v10 = vid(i + 1, j, 0);
                    let v01 = vid(i, j + 1, 0);
                    let v11 = vid(i + 1, j + 1, 0);
                    cells.extend_from_slice(&[v00, v10, v11]);
                    cells.extend_from_slice(&[v00, v11, v01]);
                } else {
                    for perm in KUHN_PERMS {
                        let mut idx = [i, j, k];
                        let mut tet = [vid(i, j, k); 4];
                        for (step, &axis) in perm.iter().enumerate() {
                            idx[axis] += 1;
                            tet[step + 1] = vid(idx[0], idx[1], idx[2]);
                        }
                        // Odd permutations give negative orientation.
                        let odd = matches!(perm, [0, 2, 1] | [1, 0, 2] | [2, 1, 0]);
                        if odd {
                            tet.swap(2, 3);
                        }
                        cells.extend_from_slice(&tet);
                    }
                }
            }
        }
    }

    let mut mesh = StructuredMesh {
        dim,
        vertices,
        cells,
        boundary_facets: Vec::new(),
        h,
        grid: Some(Grid { origin: lo, spacing, counts: [nx, ny, if dim == 3 { nz } else { 0 }] }),
    };
    mesh.boundary_facets = extract_boundary_facets(&mesh, tagger);
    mesh
}

/// Faces of `mesh` that belong to exactly one cell, in order of first
/// appearance (cell index ascending, local face order fixed).
pub(crate) fn extract_boundary_facets<T: Real>(
    mesh: &StructuredMesh<T>,
    tagger: impl Fn(&[Point<T>]) -> FacetTag,
) -> Vec<BoundaryFacet> {
    let d = mesh.dim;
    let mut counts: HashMap<Vec<usize>, u32> = HashMap::with_capacity(mesh.n_cells() * (d + 1));
    let local_faces = |cell: &[usize]| -> Vec<Vec<usize>> {
        (0..=d)
            .map(|skip| cell.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect())
            .collect()
    };
    for cell in mesh.cells() {
        for face in local_faces(cell) {
            let mut key = face.clone();
            key.sort_unstable();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let mut facets = Vec::new();
    for (c, cell) in mesh.cells().enumerate() {
        for face in local_faces(cell) {
            let mut key = face.clone();
            key.sort_unstable();
            if counts[&key] == 1 {
                let pts: Vec<Point<T>> = face.iter().map(|&v| mesh.vertices[v]).collect();
                facets.push(BoundaryFacet { tag: tagger(&pts), vertices: face, cell: c });
            }
        }
    }
    facets
}

fn on_level<T: Real>(pts: &[Point<T>], axis: usize, level: T, scale: T) -> bool {
    let tol = T::lit(1e-10) * scale;
    pts.iter().all(|p| (p[axis] - level).abs() <= tol)
}

/// Uniform mesh of the whole box `Ω+` at spacing `h_plus`.
///
/// Top facets are `NeumannTop`, all other boundary facets `DirichletOuter`.
pub fn build_global_mesh<T: Real>(geom: &GeometryConfig<T>, h_plus: T) -> Result<StructuredMesh<T>> {
    geom.validate()?;
    build_uniform_box(geom, h_plus)
}

/// Uniform mesh of the full box at spacing `h`, additionally requiring the
/// strip interface to fall on a grid plane (used by the fitted reference).
pub fn build_uniform_fitted_mesh<T: Real>(geom: &GeometryConfig<T>, h: T) -> Result<StructuredMesh<T>> {
    geom.validate()?;
    tile_count(geom.strip, h)?;
    build_uniform_box(geom, h)
}

fn build_uniform_box<T: Real>(geom: &GeometryConfig<T>, h: T) -> Result<StructuredMesh<T>> {
    let d = geom.dim;
    let ext = geom.extents();
    let mut counts = [0usize; 3];
    let mut hi = [T::zero(); 3];
    for a in 0..d {
        counts[a] = tile_count(ext[a], h)?;
        hi[a] = ext[a];
    }
    let top = geom.height;
    let scale = geom.height;
    Ok(build_box_mesh(d, [T::zero(); 3], hi, counts, h, move |pts| {
        if on_level(pts, d - 1, top, scale) {
            FacetTag::NeumannTop
        } else {
            FacetTag::DirichletOuter
        }
    }))
}

/// Uniform mesh of the local strip `[0,L] × [H - H_-, H]` (× `[0,W]` in 3D).
///
/// Top facets are `NeumannTop`, the bottom is the interface `InterfaceGamma`,
/// lateral facets (on the outer boundary) are `DirichletOuter`.
pub fn build_local_mesh<T: Real>(geom: &GeometryConfig<T>, h_minus: T) -> Result<StructuredMesh<T>> {
    geom.validate()?;
    let d = geom.dim;
    let ext = geom.extents();
    let mut counts = [0usize; 3];
    let mut lo = [T::zero(); 3];
    let mut hi = [T::zero(); 3];
    for a in 0..d - 1 {
        counts[a] = tile_count(ext[a], h_minus)?;
        hi[a] = ext[a];
    }
    counts[d - 1] = tile_count(geom.strip, h_minus)?;
    lo[d - 1] = geom.interface_level();
    hi[d - 1] = geom.height;
    let top = geom.height;
    let bottom = geom.interface_level();
    let scale = geom.height;
    Ok(build_box_mesh(d, lo, hi, counts, h_minus, move |pts| {
        if on_level(pts, d - 1, top, scale) {
            FacetTag::NeumannTop
        } else if on_level(pts, d - 1, bottom, scale) {
            FacetTag::InterfaceGamma
        } else {
            FacetTag::DirichletOuter
        }
    }))
}
