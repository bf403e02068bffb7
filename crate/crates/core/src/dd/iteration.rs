use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coupling::CoupledOperators;
use crate::error::{Error, Result};
use crate::linalg::{power_iteration_rho, Factor, PowerEstimate, SolverConfig};
use crate::scalar::{diff_norm, norm2, Real};

/// Parameters of the two-level iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DDConfig {
    /// Relaxation `θ ∈ (0, 1]`.
    pub theta: f64,
    /// Stop when `‖T^{k+1} − T^k‖ / ‖T^{k+1}‖` drops below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Diverged once the iterate difference exceeds this multiple of the first one.
    pub divergence_guard: f64,
    /// Inner solves with `K_+` and `K_−`.
    pub solver: SolverConfig,
}

impl Default for DDConfig {
    fn default() -> Self {
        Self { theta: 1.0, tol: 1e-8, max_iters: 5000, divergence_guard: 1e6, solver: SolverConfig::direct() }
    }
}

impl DDConfig {
    pub fn with_theta(theta: f64) -> Self {
        Self { theta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.divergence_guard > 1.0) {
            return Err(Error::InvalidConfig(format!("divergence_guard must exceed 1, got {}", self.divergence_guard)));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DDOutcome {
    Converged,
    Diverged,
    MaxIters,
}

/// Record of one two-level run.
#[derive(Clone, Debug, Serialize)]
pub struct DDReport<T> {
    pub converged: bool,
    pub outcome: DDOutcome,
    pub iterations: usize,
    pub theta: f64,
    /// Relative differences `‖T^k − T^{k−1}‖ / ‖T^k‖`, one per iteration.
    pub residual_history: Vec<T>,
    /// Absolute differences `‖T^k − T^{k−1}‖`.
    pub difference_history: Vec<T>,
    /// Ratio of the last two absolute differences.
    pub rho_estimate: Option<T>,
    pub t_plus: Vec<T>,
    pub t_minus: Vec<T>,
    /// Krylov iterations spent in local solves (0 with direct solves).
    pub local_solver_iterations: usize,
    /// Krylov iterations spent in global solves, including step 0.
    pub global_solver_iterations: usize,
    pub time_s: f64,
}

impl<T: Real> DDReport<T> {
    /// Turn a non-converged run into an error.
    pub fn ensure_converged(self) -> Result<Self> {
        let last = self.difference_history.last().map_or(f64::NAN, |v| v.to_f64_lossy());
        match self.outcome {
            DDOutcome::Converged => Ok(self),
            DDOutcome::Diverged => Err(Error::Diverged { iterations: self.iterations, last_difference: last }),
            DDOutcome::MaxIters => Err(Error::MaxItersExceeded { iterations: self.iterations, last_difference: last }),
        }
    }
}

/// Two-level solver with prepared `K_+` and `K_−` solves.
pub struct TwoLevelSolver<'a, T> {
    ops: &'a CoupledOperators<T>,
    plus: Factor<T>,
    minus: Factor<T>,
    local_iters: AtomicUsize,
    global_iters: AtomicUsize,
}

impl<'a, T: Real> TwoLevelSolver<'a, T> {
    pub fn new(ops: &'a CoupledOperators<T>, solver: &SolverConfig) -> Result<Self> {
        Ok(Self {
            ops,
            plus: Factor::new(&ops.k_plus, solver)?,
            minus: Factor::new(&ops.k_minus, solver)?,
            local_iters: AtomicUsize::new(0),
            global_iters: AtomicUsize::new(0),
        })
    }

    pub fn operators(&self) -> &CoupledOperators<T> {
        self.ops
    }

    /// Krylov iterations spent so far in (local, global) solves.
    pub fn solver_iterations(&self) -> (usize, usize) {
        (self.local_iters.load(Ordering::Relaxed), self.global_iters.load(Ordering::Relaxed))
    }

    fn solve_plus(&self, b: &[T]) -> Result<Vec<T>> {
        let (x, it) = self.plus.solve(b)?;
        self.global_iters.fetch_add(it, Ordering::Relaxed);
        Ok(x)
    }

    fn solve_minus(&self, b: &[T]) -> Result<Vec<T>> {
        let (x, it) = self.minus.solve(b)?;
        self.local_iters.fetch_add(it, Ordering::Relaxed);
        Ok(x)
    }

    /// `K_+ x = f_+`
    pub fn step0(&self) -> Result<Vec<T>> {
        self.solve_plus(&self.ops.f_plus)
    }

    /// `K_− x = f_− − D T_+`
    pub fn local_step(&self, t_plus: &[T]) -> Result<Vec<T>> {
        let mut rhs = self.ops.d.mul_vec(t_plus);
        for (r, &f) in rhs.iter_mut().zip(&self.ops.f_minus) {
            *r = f - *r;
        }
        self.solve_minus(&rhs)
    }

    /// `K_+ x = f_+ − S T_−`
    pub fn global_step(&self, t_minus: &[T]) -> Result<Vec<T>> {
        let mut rhs = self.ops.s.mul_vec(t_minus);
        for (r, &f) in rhs.iter_mut().zip(&self.ops.f_plus) {
            *r = f - *r;
        }
        self.solve_plus(&rhs)
    }

    /// One relaxed sweep `θ G(L(T)) + (1 − θ) T`; also returns the local iterate.
    pub fn sweep(&self, t_plus: &[T], theta: T) -> Result<(Vec<T>, Vec<T>)> {
        let t_minus = self.local_step(t_plus)?;
        let mut next = self.global_step(&t_minus)?;
        if theta != T::one() {
            for (n, &old) in next.iter_mut().zip(t_plus) {
                *n = theta * *n + (T::one() - theta) * old;
            }
        }
        Ok((next, t_minus))
    }

    /// `M v = K_+⁻¹ S K_−⁻¹ D v`
    pub fn apply_iteration_operator(&self, v: &[T]) -> Result<Vec<T>> {
        let y = self.solve_minus(&self.ops.d.mul_vec(v))?;
        self.solve_plus(&self.ops.s.mul_vec(&y))
    }

    /// Affine part of the unrelaxed sweep, `K_+⁻¹ (f_+ − S K_−⁻¹ f_−)`.
    pub fn affine_term(&self) -> Result<Vec<T>> {
        let y = self.solve_minus(&self.ops.f_minus)?;
        self.global_step(&y)
    }

    /// Power-iteration estimate of `ρ((1 − θ) I + θ M)`.
    pub fn spectral_radius(&self, theta: T, tol: T, max_iters: usize, seed: u64) -> Result<PowerEstimate<T>> {
        power_iteration_rho(self.ops.n_plus(), |v| self.apply_iteration_operator(v), theta, tol, max_iters, seed)
    }

    /// Run from the step-0 solution.
    pub fn run(&self, cfg: &DDConfig) -> Result<DDReport<T>> {
        self.run_from(cfg, None)
    }

    /// Run from `initial`, or from the step-0 solution when `None`.
    pub fn run_from(&self, cfg: &DDConfig, initial: Option<&[T]>) -> Result<DDReport<T>> {
        cfg.validate()?;
        let start = Instant::now();
        let (l0, g0) = self.solver_iterations();
        let theta = T::lit(cfg.theta);
        let tol = T::lit(cfg.tol);
        let guard = T::lit(cfg.divergence_guard);
        let mut t = match initial {
            Some(x) if x.len() != self.ops.n_plus() => {
                return Err(Error::DimensionMismatch(format!(
                    "initial iterate of length {} for n_+ = {}",
                    x.len(),
                    self.ops.n_plus()
                )))
            }
            Some(x) => x.to_vec(),
            None => self.step0()?,
        };
        let mut residuals = Vec::new();
        let mut diffs: Vec<T> = Vec::new();
        let mut outcome = DDOutcome::MaxIters;
        for _ in 0..cfg.max_iters {
            let (next, _) = self.sweep(&t, theta)?;
            let diff = diff_norm(&next, &t);
            let nn = norm2(&next);
            let rel = if nn > T::zero() { diff / nn } else { diff };
            residuals.push(rel);
            diffs.push(diff);
            t = next;
            if !rel.is_finite() || diff > guard * diffs[0] {
                outcome = DDOutcome::Diverged;
                break;
            }
            if rel < tol {
                outcome = DDOutcome::Converged;
                break;
            }
        }
        log::debug!("two-level run: {:?} after {} iterations", outcome, diffs.len());
        let t_minus = self.local_step(&t)?;
        let rho_estimate = match diffs.len() {
            n if n >= 2 && diffs[n - 2] > T::zero() => Some(diffs[n - 1] / diffs[n - 2]),
            _ => None,
        };
        let (l1, g1) = self.solver_iterations();
        Ok(DDReport {
            converged: outcome == DDOutcome::Converged,
            outcome,
            iterations: diffs.len(),
            theta: cfg.theta,
            residual_history: residuals,
            difference_history: diffs,
            rho_estimate,
            t_plus: t,
            t_minus,
            local_solver_iterations: l1 - l0,
            global_solver_iterations: g1 - g0,
            time_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// Step 0 with a fresh solver.
pub fn step0<T: Real>(ops: &CoupledOperators<T>, solver: &SolverConfig) -> Result<Vec<T>> {
    Factor::new(&ops.k_plus, solver)?.solve(&ops.f_plus).map(|(x, _)| x)
}

/// Full two-level run with a fresh solver.
pub fn run_two_level_dd<T: Real>(ops: &CoupledOperators<T>, cfg: &DDConfig) -> Result<DDReport<T>> {
    TwoLevelSolver::new(ops, &cfg.solver)?.run(cfg)
}
