use std::collections::{BTreeSet, HashMap};

use super::basis::{local_edges, n_local};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryFacet, FacetTag, StructuredMesh};
use crate::scalar::{Point, Real};

/// Lagrange degree-of-freedom numbering: vertex dofs keep the vertex index,
/// edge dofs follow in order of first appearance (cell ascending, local edge
/// order).
#[derive(Clone, Debug)]
pub struct DofMap<T> {
    degree: usize,
    dim: usize,
    n_dofs: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<Point<T>>,
    edge_dof: HashMap<(usize, usize), usize>,
}

/// Number the dofs of `mesh` for Lagrange elements of degree `m`.
pub fn build_dofmap<T: Real>(mesh: &StructuredMesh<T>, m: usize) -> Result<DofMap<T>> {
    if m != 1 && m != 2 {
        return Err(Error::UnsupportedDegree(m));
    }
    let dim = mesh.dim();
    let nl = n_local(dim, m);
    let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * nl);
    let mut dof_coords: Vec<Point<T>> = mesh.vertices().to_vec();
    let mut edge_dof = HashMap::new();
    let half = T::lit(0.5);
    for cell in mesh.cells() {
        cell_dofs.extend_from_slice(cell);
        if m == 2 {
            for &(a, b) in local_edges(dim) {
                let (va, vb) = (cell[a], cell[b]);
                let key = (va.min(vb), va.max(vb));
                let id = *edge_dof.entry(key).or_insert_with(|| {
                    let pa = mesh.vertices()[va];
                    let pb = mesh.vertices()[vb];
                    dof_coords.push([(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half, (pa[2] + pb[2]) * half]);
                    dof_coords.len() - 1
                });
                cell_dofs.push(id);
            }
        }
    }
    Ok(DofMap { degree: m, dim, n_dofs: dof_coords.len(), n_local: nl, cell_dofs, dof_coords, edge_dof })
}

impl<T: Real> DofMap<T> {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.n_local..(c + 1) * self.n_local]
    }

    pub fn dof_coords(&self) -> &[Point<T>] {
        &self.dof_coords
    }

    /// Dofs whose basis functions are nonzero on the facet: its vertices and,
    /// for P2, its edges.
    pub fn facet_dofs(&self, facet: &BoundaryFacet) -> Vec<usize> {
        let mut out = facet.vertices.clone();
        if self.degree == 2 {
            let v = &facet.vertices;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    let key = (v[i].min(v[j]), v[i].max(v[j]));
                    out.push(self.edge_dof[&key]);
                }
            }
        }
        out
    }

    /// Sorted dofs on all boundary facets carrying `tag`.
    pub fn dofs_with_tag(&self, mesh: &StructuredMesh<T>, tag: FacetTag) -> Vec<usize> {
        let set: BTreeSet<usize> = mesh
            .boundary_facets()
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| self.facet_dofs(f))
            .collect();
        set.into_iter().collect()
    }
}
