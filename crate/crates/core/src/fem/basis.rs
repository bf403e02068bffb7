//! Lagrange P1/P2 shape functions in barycentric form.
//!
//! Local ordering: vertex functions first, then one function per edge with
//! edges in lexicographic vertex-pair order, i.e. (0,1),(0,2),(1,2) for
//! triangles and (0,1),(0,2),(0,3),(1,2),(1,3),(2,3) for tetrahedra.

use crate::scalar::Real;

/// Maximum number of local functions (P2 tetrahedron).
pub const MAX_LOCAL: usize = 10;

pub const EDGES_2D: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
pub const EDGES_3D: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &EDGES_2D
    } else {
        &EDGES_3D
    }
}

/// Number of local shape functions.
pub fn n_local(dim: usize, degree: usize) -> usize {
    match degree {
        1 => dim + 1,
        _ => dim + 1 + local_edges(dim).len(),
    }
}

/// Shape function values at barycentric point `lam`.
pub fn eval<T: Real>(dim: usize, degree: usize, lam: &[T; 4]) -> [T; MAX_LOCAL] {
    let mut out = [T::zero(); MAX_LOCAL];
    let nv = dim + 1;
    if degree == 1 {
        out[..nv].copy_from_slice(&lam[..nv]);
        return out;
    }
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    for i in 0..nv {
        out[i] = lam[i] * (two * lam[i] - T::one());
    }
    for (e, &(a, b)) in local_edges(dim).iter().enumerate() {
        out[nv + e] = four * lam[a] * lam[b];
    }
    out
}

/// Shape function gradients at `lam`, given the (constant) gradients of the
/// barycentric coordinates.
pub fn grad<T: Real>(dim: usize, degree: usize, lam: &[T; 4], g: &[[T; 3]; 4]) -> [[T; 3]; MAX_LOCAL] {
    let mut out = [[T::zero(); 3]; MAX_LOCAL];
    let nv = dim + 1;
    if degree == 1 {
        out[..nv].copy_from_slice(&g[..nv]);
        return out;
    }
    let four = T::lit(4.0);
    for i in 0..nv {
        let f = four * lam[i] - T::one();
        for c in 0..dim {
            out[i][c] = f * g[i][c];
        }
    }
    for (e, &(a, b)) in local_edges(dim).iter().enumerate() {
        for c in 0..dim {
            out[nv + e][c] = four * (lam[a] * g[b][c] + lam[b] * g[a][c]);
        }
    }
    out
}
