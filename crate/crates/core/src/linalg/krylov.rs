//! Preconditioned conjugate gradients and restarted GMRES.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm2, Real};

/// Inverse diagonal, or ones where the diagonal vanishes.
pub(crate) fn jacobi_inverse<T: Real>(a: &SparseMatrix<T>) -> Vec<T> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
        .collect()
}

fn apply_diag<T: Real>(d: Option<&[T]>, r: &[T]) -> Vec<T> {
    match d {
        Some(d) => r.iter().zip(d).map(|(&x, &s)| x * s).collect(),
        None => r.to_vec(),
    }
}

/// Conjugate gradients. Stops when `‖b − A x‖ ≤ rel_tol ‖b‖`; returns the
/// solution and the number of iterations.
pub fn conjugate_gradient<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    precond: Option<&[T]>,
    rel_tol: T,
    max_iters: usize,
) -> Result<(Vec<T>, usize)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    if bnorm == T::zero() {
        return Ok((vec![T::zero(); n], 0));
    }
    let target = rel_tol * bnorm;
    let mut r = b.to_vec();
    axpy(-T::one(), &a.mul_vec(&x), &mut r);
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok((x, 0));
    }
    let mut z = apply_diag(precond, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for k in 0..max_iters {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::NotPositiveDefinite { row: k, pivot: pap.to_f64_lossy() });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm2(&r);
        if rnorm <= target {
            return Ok((x, k + 1));
        }
        z = apply_diag(precond, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence { iterations: max_iters, residual: (rnorm / bnorm).to_f64_lossy() })
}

/// Right-preconditioned restarted GMRES. Iterations count Arnoldi steps
/// across all restart cycles.
pub fn gmres<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    precond: Option<&[T]>,
    rel_tol: T,
    max_iters: usize,
    restart: usize,
) -> Result<(Vec<T>, usize)> {
    gmres_with(
        |v: &[T]| Ok(a.mul_vec(v)),
        |v: &[T]| Ok(apply_diag(precond, v)),
        b,
        x0,
        rel_tol,
        max_iters,
        restart,
    )
}

/// Matrix-free right-preconditioned restarted GMRES: `apply` computes `A v`
/// and `precond` computes `P⁻¹ v`.
pub fn gmres_with<T, A, P>(
    mut apply: A,
    mut precond: P,
    b: &[T],
    x0: Option<&[T]>,
    rel_tol: T,
    max_iters: usize,
    restart: usize,
) -> Result<(Vec<T>, usize)>
where
    T: Real,
    A: FnMut(&[T]) -> Result<Vec<T>>,
    P: FnMut(&[T]) -> Result<Vec<T>>,
{
    let n = b.len();
    let restart = restart.max(1);
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    if bnorm == T::zero() {
        return Ok((vec![T::zero(); n], 0));
    }
    let target = rel_tol * bnorm;
    let mut total = 0usize;
    let mut rnorm;
    loop {
        let mut r = b.to_vec();
        axpy(-T::one(), &apply(&x)?, &mut r);
        rnorm = norm2(&r);
        if rnorm <= target {
            return Ok((x, total));
        }
        if total >= max_iters {
            break;
        }
        let mut v: Vec<Vec<T>> = Vec::with_capacity(restart + 1);
        v.push(r.iter().map(|&ri| ri / rnorm).collect());
        let mut h = vec![vec![T::zero(); restart]; restart + 1];
        let mut cs = vec![T::zero(); restart];
        let mut sn = vec![T::zero(); restart];
        let mut g = vec![T::zero(); restart + 1];
        g[0] = rnorm;
        let mut used = 0;
        for j in 0..restart {
            if total >= max_iters {
                break;
            }
            let mut w = apply(&precond(&v[j])?)?;
            // modified Gram–Schmidt
            for (i, vi) in v.iter().enumerate() {
                h[i][j] = dot(&w, vi);
                axpy(-h[i][j], vi, &mut w);
            }
            h[j + 1][j] = norm2(&w);
            for i in 0..j {
                let tmp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = tmp;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom == T::zero() {
                cs[j] = T::one();
                sn[j] = T::zero();
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = h[j + 1][j] / denom;
            }
            let hj1 = h[j + 1][j];
            h[j][j] = cs[j] * h[j][j] + sn[j] * hj1;
            h[j + 1][j] = T::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            total += 1;
            used = j + 1;
            let breakdown = hj1.abs() <= T::epsilon() * denom.max(T::min_positive_value());
            if !breakdown {
                v.push(w.iter().map(|&wi| wi / hj1).collect());
            }
            if g[j + 1].abs() <= target || breakdown {
                break;
            }
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![T::zero(); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = if h[i][i] != T::zero() { s / h[i][i] } else { T::zero() };
        }
        let mut update = vec![T::zero(); n];
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, &v[i], &mut update);
        }
        let update = precond(&update)?;
        axpy(T::one(), &update, &mut x);
    }
    Err(Error::NoConvergence { iterations: total, residual: (rnorm / bnorm).to_f64_lossy() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonsymmetric(n: usize) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
                t.push((i + 1, i, -0.5));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn gmres_with_short_restart_converges() {
        let a = nonsymmetric(60);
        let b: Vec<f64> = (0..60).map(|i| 1.0 + i as f64).collect();
        let d = jacobi_inverse(&a);
        let (x, its) = gmres(&a, &b, None, Some(&d), 1e-12, 1000, 5).unwrap();
        assert!(its > 0);
        let mut r = b.clone();
        axpy(-1.0, &a.mul_vec(&x), &mut r);
        assert!(norm2(&r) <= 1e-12 * norm2(&b) * 1.0001);
    }

    #[test]
    fn cg_reports_no_convergence() {
        let mut t = Vec::new();
        for i in 0..50 {
            t.push((i, i, 2.0));
            if i + 1 < 50 {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(50, 50, &t);
        let b = vec![1.0; 50];
        assert!(matches!(
            conjugate_gradient(&a, &b, None, None, 1e-12, 3),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }
}
