//! Reverse Cuthill–McKee ordering and envelope (skyline) Cholesky.

use std::collections::VecDeque;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reverse Cuthill–McKee permutation of the symmetric pattern of `a`;
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &SparseMatrix<T>) -> Vec<usize> {
    let n = a.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last_level = |start: usize, visited: &[bool]| -> (usize, usize) {
        let mut level = vec![usize::MAX; n];
        level[start] = 0;
        let mut q = VecDeque::from([start]);
        let mut far = start;
        while let Some(u) = q.pop_front() {
            if level[u] > level[far] || (level[u] == level[far] && degree[u] < degree[far]) {
                far = u;
            }
            for &v in &adj[u] {
                if !visited[v] && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (far, level[far])
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: repeat BFS until eccentricity stops growing
        let mut start = seed;
        let (mut far, mut ecc) = bfs_last_level(start, &visited);
        for _ in 0..8 {
            let (next, e) = bfs_last_level(far, &visited);
            if e <= ecc {
                break;
            }
            (start, far, ecc) = (far, next, e);
        }
        visited[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (degree[v], v));
            for v in nb {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor of a symmetric positive definite matrix stored by rows
/// over its envelope, in a fill-reducing ordering.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky<T> {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    l: Vec<T>,
}

impl<T: Real> EnvelopeCholesky<T> {
    pub fn factor(a: &SparseMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("Cholesky of {}x{}", n, a.ncols())));
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &j in a.row(old).0 {
                let jn = inv[j];
                if jn < first[new] {
                    first[new] = jn;
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut l = vec![T::zero(); offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                if jn <= new {
                    l[offset[new] + jn - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let ri = offset[i];
            for j in fi..i {
                let fj = first[j];
                let rj = offset[j];
                let k0 = fi.max(fj);
                let mut s = l[ri + j - fi];
                for k in k0..j {
                    s -= l[ri + k - fi] * l[rj + k - fj];
                }
                l[ri + j - fi] = s / l[rj + j - fj];
            }
            let mut d = l[ri + i - fi];
            for k in fi..i {
                let v = l[ri + k - fi];
                d -= v * v;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: perm[i], pivot: d.to_f64_lossy() });
            }
            l[ri + i - fi] = d.sqrt();
        }
        Ok(Self { n, perm, first, offset, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..self.n {
            let fi = self.first[i];
            let ri = self.offset[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.l[ri + k - fi] * y[k];
            }
            y[i] = s / self.l[ri + i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let ri = self.offset[i];
            let xi = y[i] / self.l[ri + i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.l[ri + k - fi] * xi;
            }
        }
        let mut x = vec![T::zero(); self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(20);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplacian_1d(50);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        assert!(f.envelope_size() <= 2 * 50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = f.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::NotPositiveDefinite { .. })));
    }
}
