use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dense::DenseMatrix;
use super::solver::{Factor, SolverConfig};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Real};

/// Largest `n_+` accepted by the dense spectral oracle.
pub const DENSE_SPECTRAL_LIMIT: usize = 2000;

/// Result of a power iteration on `(1 − θ) I + θ M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerEstimate<T> {
    /// Norm-ratio estimate of the dominant eigenvalue modulus.
    pub rho: T,
    /// `vᵀ A v` for the final unit iterate; its sign is the sign of the
    /// dominant eigenvalue when that eigenvalue is real.
    pub rayleigh: T,
    pub iterations: usize,
    pub seed: u64,
}

/// Deterministic start vector with entries uniform in `[-1, 1)`, normalized.
pub fn seeded_unit_vector<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let nv = norm2(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    v
}

/// Power iteration for the spectral radius of `(1 − θ) I + θ M`, where
/// `apply` computes `M v`.
///
/// Converged when successive norm-ratio estimates differ by less than `tol`
/// relative to the current one.
pub fn power_iteration_rho<T, F>(
    n: usize,
    mut apply: F,
    theta: T,
    tol: T,
    max_iters: usize,
    seed: u64,
) -> Result<PowerEstimate<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    if n == 0 {
        return Ok(PowerEstimate { rho: T::zero(), rayleigh: T::zero(), iterations: 0, seed });
    }
    let mut v = seeded_unit_vector::<T>(n, seed);
    let one_minus = T::one() - theta;
    let mut prev = T::nan();
    let mut rho = T::zero();
    for k in 1..=max_iters {
        let mv = apply(&v)?;
        let w: Vec<T> = v.iter().zip(&mv).map(|(&vi, &mi)| one_minus * vi + theta * mi).collect();
        rho = norm2(&w);
        let rayleigh = dot(&v, &w);
        if rho == T::zero() {
            return Ok(PowerEstimate { rho, rayleigh, iterations: k, seed });
        }
        if (rho - prev).abs() < tol * rho {
            return Ok(PowerEstimate { rho, rayleigh, iterations: k, seed });
        }
        prev = rho;
        v = w.into_iter().map(|x| x / rho).collect();
    }
    Err(Error::NoConvergence { iterations: max_iters, residual: rho.to_f64_lossy() })
}

/// Largest eigenvalue modulus of a dense matrix.
pub fn dense_matrix_spectral_radius<T: Real>(m: &DenseMatrix<T>) -> Result<T> {
    Ok(m
        .eigenvalues()?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(T::zero(), T::max))
}

/// Assemble `M = K_+⁻¹ S K_−⁻¹ D` densely, one column per global dof.
pub fn dense_iteration_matrix<T: Real>(
    k_plus: &SparseMatrix<T>,
    s: &SparseMatrix<T>,
    k_minus: &SparseMatrix<T>,
    d: &SparseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    let n = k_plus.nrows();
    if n > DENSE_SPECTRAL_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_SPECTRAL_LIMIT });
    }
    let fp = Factor::new(k_plus, &SolverConfig::direct())?;
    let fm = Factor::new(k_minus, &SolverConfig::direct())?;
    let dt = d.transpose();
    let mut m = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let (rows, vals) = dt.row(j);
        if rows.is_empty() {
            continue;
        }
        let mut col = vec![T::zero(); d.nrows()];
        for (&r, &v) in rows.iter().zip(vals) {
            col[r] = v;
        }
        let (y, _) = fm.solve(&col)?;
        let (z, _) = fp.solve(&s.mul_vec(&y))?;
        m.set_column(j, &z);
    }
    Ok(m)
}

/// Dense oracle for `ρ((1 − θ) I + θ K_+⁻¹ S K_−⁻¹ D)`.
pub fn dense_spectral_radius<T: Real>(
    k_plus: &SparseMatrix<T>,
    s: &SparseMatrix<T>,
    k_minus: &SparseMatrix<T>,
    d: &SparseMatrix<T>,
    theta: T,
) -> Result<T> {
    let mut m = dense_iteration_matrix(k_plus, s, k_minus, d)?;
    relax_in_place(&mut m, theta);
    dense_matrix_spectral_radius(&m)
}

/// `M ← (1 − θ) I + θ M`
pub fn relax_in_place<T: Real>(m: &mut DenseMatrix<T>, theta: T) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= theta;
        }
        m[(i, i)] += T::one() - theta;
    }
}
