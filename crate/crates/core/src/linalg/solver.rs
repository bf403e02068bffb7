use serde::{Deserialize, Serialize};

use super::dense::{DenseLu, DenseMatrix};
use super::envelope::EnvelopeCholesky;
use super::krylov::{conjugate_gradient, gmres, jacobi_inverse};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    ConjugateGradient,
    Gmres,
    /// Envelope Cholesky for symmetric input, dense LU otherwise.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub restart: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            rel_tol: 1e-12,
            max_iters: 20_000,
            restart: 50,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn direct() -> Self {
        Self::default()
    }

    pub fn gmres(rel_tol: f64) -> Self {
        Self { method: SolverMethod::Gmres, rel_tol, ..Self::default() }
    }

    pub fn cg(rel_tol: f64) -> Self {
        Self { method: SolverMethod::ConjugateGradient, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Solve `A x = b`. Returns the solution and the iteration count (0 for
/// direct solves).
pub fn solve<T: Real>(a: &SparseMatrix<T>, b: &[T], cfg: &SolverConfig) -> Result<(Vec<T>, usize)> {
    Factor::new(a, cfg)?.solve(b)
}

enum Kind<T> {
    Cholesky(EnvelopeCholesky<T>),
    Lu(DenseLu<T>),
    Iterative { a: SparseMatrix<T>, precond: Option<Vec<T>> },
}

/// A prepared solver for one matrix: a factorization for the direct method,
/// or the matrix plus its preconditioner for Krylov methods.
pub struct Factor<T> {
    n: usize,
    cfg: SolverConfig,
    kind: Kind<T>,
}

impl<T: Real> Factor<T> {
    pub fn new(a: &SparseMatrix<T>, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("solve with {}x{} matrix", n, a.ncols())));
        }
        let kind = match cfg.method {
            SolverMethod::Direct => {
                if a.is_symmetric(T::lit(1e-13)) {
                    Kind::Cholesky(EnvelopeCholesky::factor(a)?)
                } else {
                    Kind::Lu(DenseMatrix::from_row_major(n, n, a.to_dense()).lu()?)
                }
            }
            SolverMethod::ConjugateGradient | SolverMethod::Gmres => Kind::Iterative {
                a: a.clone(),
                precond: match cfg.preconditioner {
                    Preconditioner::Jacobi => Some(jacobi_inverse(a)),
                    Preconditioner::None => None,
                },
            },
        };
        Ok(Self { n, cfg: *cfg, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn solve(&self, b: &[T]) -> Result<(Vec<T>, usize)> {
        self.solve_with_guess(b, None)
    }

    /// As [`Factor::solve`], warm-starting Krylov methods from `x0`.
    pub fn solve_with_guess(&self, b: &[T], x0: Option<&[T]>) -> Result<(Vec<T>, usize)> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!("rhs length {} for n = {}", b.len(), self.n)));
        }
        let tol = T::lit(self.cfg.rel_tol);
        match &self.kind {
            Kind::Cholesky(c) => Ok((c.solve(b), 0)),
            Kind::Lu(lu) => Ok((lu.solve(b), 0)),
            Kind::Iterative { a, precond } => match self.cfg.method {
                SolverMethod::ConjugateGradient => {
                    conjugate_gradient(a, b, x0, precond.as_deref(), tol, self.cfg.max_iters)
                }
                _ => gmres(a, b, x0, precond.as_deref(), tol, self.cfg.max_iters, self.cfg.restart),
            },
        }
    }
}
