use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![T::zero(); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "dense matrix data length");
        Self { nrows, ncols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_row_major(nrows, ncols, data)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[T]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        self.data
            .chunks(self.ncols.max(1))
            .take(self.nrows)
            .map(|row| row.iter().zip(x).fold(T::zero(), |a, (&r, &v)| a + r * v))
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<DenseLu<T>> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch(format!("LU of {}x{}", self.nrows, self.ncols)));
        }
        let n = self.nrows;
        let mut a = self.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, T::zero()), |best, c| if c.1 > best.1 { c } else { best });
            if pmax <= T::epsilon() * scale * T::from_usize_lossy(n) || pmax == T::zero() {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let akj = a[k * n + j];
                        a[i * n + j] -= f * akj;
                    }
                }
            }
        }
        Ok(DenseLu { n, lu: a, piv })
    }

    /// All eigenvalues as `(re, im)` pairs: balancing, Householder reduction to
    /// Hessenberg form, then the Francis double-shift QR iteration.
    pub fn eigenvalues(&self) -> Result<Vec<(T, T)>> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch(format!("eigenvalues of {}x{}", self.nrows, self.ncols)));
        }
        let mut a = self.clone();
        balance(&mut a);
        to_hessenberg(&mut a);
        hqr(&mut a)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ncols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ncols + j]
    }
}

/// Packed `PA = LU` factors.
#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Least-squares solution of `A x ≈ b` by Householder QR (`A` is m×n, m ≥ n).
pub fn qr_least_squares<T: Real>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n || b.len() != m {
        return Err(Error::DimensionMismatch(format!("least squares with {m}x{n} and rhs {}", b.len())));
    }
    let mut r = a.clone();
    let mut y = b.to_vec();
    let mut diag_max = T::zero();
    for k in 0..n {
        let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::RankDeficient(format!("column {k} vanishes")));
        }
        let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vn2: T = v.iter().map(|&x| x * x).sum();
        if vn2 > T::zero() {
            for j in k..n {
                let s: T = v.iter().enumerate().map(|(t, &vt)| vt * r[(k + t, j)]).sum();
                let f = (s + s) / vn2;
                for (t, &vt) in v.iter().enumerate() {
                    r[(k + t, j)] -= f * vt;
                }
            }
            let s: T = v.iter().enumerate().map(|(t, &vt)| vt * y[k + t]).sum();
            let f = (s + s) / vn2;
            for (t, &vt) in v.iter().enumerate() {
                y[k + t] -= f * vt;
            }
        }
        diag_max = diag_max.max(r[(k, k)].abs());
    }
    let tol = T::epsilon() * T::from_usize_lossy(m.max(n)) * T::lit(10.0) * diag_max;
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        if r[(i, i)].abs() <= tol {
            return Err(Error::RankDeficient(format!("R[{i},{i}] = {} below tolerance", r[(i, i)])));
        }
        let mut s = y[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    Ok(x)
}

/// Diagonal similarity scaling by powers of two to equalize row and column norms.
fn balance<T: Real>(a: &mut DenseMatrix<T>) {
    let n = a.nrows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    let ginv = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Orthogonal similarity reduction to upper Hessenberg form.
fn to_hessenberg<T: Real>(a: &mut DenseMatrix<T>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[(k + 1, k)] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vn2: T = v.iter().map(|&x| x * x).sum();
        if vn2 == T::zero() {
            continue;
        }
        // A <- H A
        for j in 0..n {
            let s: T = v.iter().enumerate().map(|(t, &vt)| vt * a[(k + 1 + t, j)]).sum();
            let f = (s + s) / vn2;
            for (t, &vt) in v.iter().enumerate() {
                a[(k + 1 + t, j)] -= f * vt;
            }
        }
        // A <- A H
        for i in 0..n {
            let s: T = v.iter().enumerate().map(|(t, &vt)| vt * a[(i, k + 1 + t)]).sum();
            let f = (s + s) / vn2;
            for (t, &vt) in v.iter().enumerate() {
                a[(i, k + 1 + t)] -= f * vt;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = T::zero();
        }
    }
}

#[inline]
fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix (Francis double-shift QR).
///
/// Indexing is 1-based internally to keep the classic formulation readable.
fn hqr<T: Real>(h: &mut DenseMatrix<T>) -> Result<Vec<(T, T)>> {
    let n = h.nrows() as isize;
    let mut a = vec![vec![T::zero(); n as usize + 1]; n as usize + 1];
    for i in 0..n as usize {
        for j in 0..n as usize {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![T::zero(); n as usize + 1];
    let mut wi = vec![T::zero(); n as usize + 1];
    let ix = |i: isize| i as usize;

    let mut anorm = T::zero();
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += a[ix(i)][ix(j)].abs();
        }
    }
    let (c075, c04375, half) = (T::lit(0.75), T::lit(0.4375), T::lit(0.5));
    let mut nn = n;
    let mut t = T::zero();
    while nn >= 1 {
        let mut its = 0;
        let mut l: isize;
        loop {
            l = nn;
            while l >= 2 {
                let mut s = a[ix(l - 1)][ix(l - 1)].abs() + a[ix(l)][ix(l)].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a[ix(l)][ix(l - 1)].abs() + s == s {
                    a[ix(l)][ix(l - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a[ix(nn)][ix(nn)];
            if l == nn {
                wr[ix(nn)] = x + t;
                wi[ix(nn)] = T::zero();
                nn -= 1;
            } else {
                let mut y = a[ix(nn - 1)][ix(nn - 1)];
                let mut w = a[ix(nn)][ix(nn - 1)] * a[ix(nn - 1)][ix(nn)];
                if l == nn - 1 {
                    let p = half * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= T::zero() {
                        z = p + sign(z, p);
                        wr[ix(nn - 1)] = x + z;
                        wr[ix(nn)] = x + z;
                        if z != T::zero() {
                            wr[ix(nn)] = x - w / z;
                        }
                        wi[ix(nn - 1)] = T::zero();
                        wi[ix(nn)] = T::zero();
                    } else {
                        wr[ix(nn - 1)] = x + p;
                        wr[ix(nn)] = x + p;
                        wi[ix(nn - 1)] = -z;
                        wi[ix(nn)] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(Error::NoConvergence { iterations: its, residual: a[ix(nn)][ix(nn - 1)].abs().to_f64_lossy() });
                    }
                    if its == 10 || its == 20 || its == 40 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[ix(i)][ix(i)] -= x;
                        }
                        let s = a[ix(nn)][ix(nn - 1)].abs() + a[ix(nn - 1)][ix(nn - 2)].abs();
                        x = c075 * s;
                        y = x;
                        w = -c04375 * s * s;
                    }
                    its += 1;
                    let (mut p, mut q, mut r, mut z);
                    let mut m = nn - 2;
                    loop {
                        z = a[ix(m)][ix(m)];
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / a[ix(m + 1)][ix(m)] + a[ix(m)][ix(m + 1)];
                        q = a[ix(m + 1)][ix(m + 1)] - z - r - s0;
                        r = a[ix(m + 2)][ix(m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[ix(m)][ix(m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[ix(m - 1)][ix(m - 1)].abs() + z.abs() + a[ix(m + 1)][ix(m + 1)].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[ix(i)][ix(i - 2)] = T::zero();
                        if i != m + 2 {
                            a[ix(i)][ix(i - 3)] = T::zero();
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[ix(k)][ix(k - 1)];
                            q = a[ix(k + 1)][ix(k - 1)];
                            r = T::zero();
                            if k != nn - 1 {
                                r = a[ix(k + 2)][ix(k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != T::zero() {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != T::zero() {
                            if k == m {
                                if l != m {
                                    a[ix(k)][ix(k - 1)] = -a[ix(k)][ix(k - 1)];
                                }
                            } else {
                                a[ix(k)][ix(k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[ix(k)][ix(j)] + q * a[ix(k + 1)][ix(j)];
                                if k != nn - 1 {
                                    p += r * a[ix(k + 2)][ix(j)];
                                    a[ix(k + 2)][ix(j)] -= p * z;
                                }
                                a[ix(k + 1)][ix(j)] -= p * y;
                                a[ix(k)][ix(j)] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[ix(i)][ix(k)] + y * a[ix(i)][ix(k + 1)];
                                if k != nn - 1 {
                                    p += z * a[ix(i)][ix(k + 2)];
                                    a[ix(i)][ix(k + 2)] -= p * r;
                                }
                                a[ix(i)][ix(k + 1)] -= p * q;
                                a[ix(i)][ix(k)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if !(l < nn - 1) {
                break;
            }
        }
    }
    Ok((1..=n as usize).map(|i| (wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = a.lu().unwrap().solve(&[3.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let s = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(s.lu(), Err(Error::SingularMatrix)));
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let ev = a.eigenvalues().unwrap();
        assert!(ev.iter().all(|&(r, i)| r.abs() < 1e-14 && i.abs() < 1e-14));
        // rotation: ±i
        let a = DenseMatrix::<f64>::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let mut ev = a.eigenvalues().unwrap();
        ev.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
        assert!((ev[0].1 + 1.0).abs() < 1e-14 && (ev[1].1 - 1.0).abs() < 1e-14);
        let a = DenseMatrix::<f64>::from_rows(&[vec![2.0, 0.0, 0.0], vec![1.0, 3.0, 0.0], vec![4.0, 5.0, -6.0]]);
        let mut re: Vec<f64> = a.eigenvalues().unwrap().iter().map(|e| e.0).collect();
        re.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in re.iter().zip([-6.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn qr_recovers_exact_line() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        let x = qr_least_squares::<f64>(&a, &[0.0, 1.0, 2.0]).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
