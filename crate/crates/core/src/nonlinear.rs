//! Temperature-dependent conductivity by Picard linearization.
//!
//! Each outer iteration freezes the conductivity per cell at the centroid
//! temperature of the previous iterate and solves the resulting linear
//! problem, either with the two-level method (constant extension `κ_{+,B}`
//! inside the strip) or monolithically on a fitted mesh.

use std::io::Read;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coupling::{build_coupled_operators_with, AlphaPolicy, CouplingCoefficients, Discretization, ProblemData};
use crate::dd::{build_fitted_mesh, solve_fitted, DDConfig, FittedSolution, RefinementMode, TwoLevelSolver};
use crate::error::{Error, Result};
use crate::fem::{eval_basis, Coefficient, DofMap};
use crate::linalg::SolverConfig;
use crate::mesh::{GeometryConfig, StructuredMesh};
use crate::scalar::{relative_l2, Real};

/// Piecewise-linear conductivity table, constant outside its range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialCurve {
    points: Vec<(f64, f64)>,
}

impl MaterialCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCurve("no points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidCurve(format!("temperatures not strictly increasing at {}", w[1].0)));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite() && p.0.is_finite())) {
            return Err(Error::InvalidCurve(format!("invalid point ({}, {})", p.0, p.1)));
        }
        Ok(Self { points })
    }

    pub fn constant(kappa: f64) -> Result<Self> {
        Self::new(vec![(0.0, kappa)])
    }

    /// Read a two-column CSV with header `T,kappa`.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "T" || &headers[1] != "kappa" {
            return Err(Error::InvalidCurve(format!("expected header `T,kappa`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut pts = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidCurve(format!("`{s}`: {e}")));
            pts.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        Self::new(pts)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval<T: Real>(&self, t: T) -> T {
        let t = t.to_f64_lossy();
        let p = &self.points;
        if t <= p[0].0 {
            return T::lit(p[0].1);
        }
        if t >= p[p.len() - 1].0 {
            return T::lit(p[p.len() - 1].1);
        }
        let i = p.partition_point(|q| q.0 <= t);
        let (a, b) = (p[i - 1], p[i]);
        T::lit(a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0))
    }

    pub fn max_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Conductivity curves of the bulk material (outside the strip) and the strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialPair {
    pub a: MaterialCurve,
    pub b: MaterialCurve,
}

impl MaterialPair {
    /// Linear synthetic curves over `[293.15, 1293.15]`: `κ_A` from 1 to 2
    /// and `κ_B` from 0.25 to 0.75.
    pub fn synthetic() -> Self {
        Self {
            a: MaterialCurve::new(vec![(293.15, 1.0), (1293.15, 2.0)]).expect("valid curve"),
            b: MaterialCurve::new(vec![(293.15, 0.25), (1293.15, 0.75)]).expect("valid curve"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearConfig {
    /// Constant extension of `κ_+` inside the strip.
    pub kappa_plus_b: f64,
    /// Relative L² change of the temperature below which Picard stops.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// `T ← ω T_new + (1 − ω) T_old`
    pub damping: f64,
    pub alpha: AlphaPolicy,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self { kappa_plus_b: 0.3, picard_tol: 1e-6, picard_max: 100, damping: 1.0, alpha: AlphaPolicy::default() }
    }
}

impl NonlinearConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_plus_b > 0.0) {
            return Err(Error::InvalidConfig(format!("kappa_plus_b must be positive, got {}", self.kappa_plus_b)));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return Err(Error::InvalidConfig("picard_tol and picard_max must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        self.alpha.validate()
    }
}

/// Outcome of a two-level Picard solve.
#[derive(Clone, Debug, Serialize)]
pub struct PicardReport<T> {
    /// Outer iterations after the initial solve.
    pub picard_iterations: usize,
    /// Relative L² temperature change per outer iteration.
    pub change_history: Vec<T>,
    /// Two-level iterations of each inner solve, initial solve first.
    pub inner_iterations: Vec<usize>,
    /// Krylov iterations per global solve, averaged over all inner solves
    /// (0 with direct solves).
    pub mean_global_solver_iterations: f64,
    pub time_s: f64,
    pub t_plus: Vec<T>,
    pub t_minus: Vec<T>,
}

impl<T> PicardReport<T> {
    pub fn total_inner_iterations(&self) -> usize {
        self.inner_iterations.iter().sum()
    }
}

/// Outcome of a monolithic Picard solve.
#[derive(Clone, Debug)]
pub struct MonolithicPicardReport<T> {
    pub picard_iterations: usize,
    pub change_history: Vec<T>,
    pub mean_solver_iterations: f64,
    pub time_s: f64,
    pub solution: FittedSolution<T>,
}

/// Field values at every cell centroid.
pub fn centroid_values<T: Real>(mesh: &StructuredMesh<T>, dofs: &DofMap<T>, values: &[T]) -> Vec<T> {
    let d = mesh.dim();
    let mut lam = [T::zero(); 4];
    for l in lam.iter_mut().take(d + 1) {
        *l = T::one() / T::from_usize_lossy(d + 1);
    }
    let phi = eval_basis(d, dofs.degree(), &lam);
    (0..mesh.n_cells())
        .map(|c| dofs.cell_dofs(c).iter().zip(&phi).fold(T::zero(), |s, (&k, &p)| s + values[k] * p))
        .collect()
}

fn relaxed<T: Real>(new: Vec<T>, old: &[T], omega: T) -> Vec<T> {
    if omega == T::one() {
        return new;
    }
    new.iter().zip(old).map(|(&n, &o)| omega * n + (T::one() - omega) * o).collect()
}

fn stacked_change<T: Real>(a_new: &[T], b_new: &[T], a_old: &[T], b_old: &[T]) -> T {
    let new: Vec<T> = a_new.iter().chain(b_new).copied().collect();
    let old: Vec<T> = a_old.iter().chain(b_old).copied().collect();
    relative_l2(&new, &old)
}

/// Picard iteration with a two-level linear solve per step. Every inner run
/// starts from its own step-0 solution.
pub fn picard_two_level<T: Real>(
    disc: &Discretization<T>,
    curves: &MaterialPair,
    nl: &NonlinearConfig,
    dd: &DDConfig,
    problem: &ProblemData<'_, T>,
) -> Result<PicardReport<T>> {
    nl.validate()?;
    dd.validate()?;
    let start = Instant::now();
    let kpb = T::lit(nl.kappa_plus_b);
    let alpha = nl.alpha.alpha(T::lit(curves.b.max_value()), disc.h_minus());
    let in_strip = disc.global_cells_in_strip();
    let td = problem.t_dirichlet;
    let temp_plus = vec![td; disc.global_mesh.n_cells()];
    let temp_minus = vec![td; disc.local_mesh.n_cells()];
    let omega = T::lit(nl.damping);

    let mut inner_iterations = Vec::new();
    let (mut solves, mut krylov) = (0usize, 0usize);
    let solve = |tp: &[T], tm: &[T]| -> Result<(Vec<T>, Vec<T>, usize, usize)> {
        let kp: Vec<T> = tp.iter().zip(&in_strip).map(|(&t, &s)| if s { kpb } else { curves.a.eval(t) }).collect();
        let km: Vec<T> = tm.iter().map(|&t| curves.b.eval(t)).collect();
        let coeffs = CouplingCoefficients {
            kappa_plus: Coefficient::PerCell(&kp),
            kappa_plus_b: kpb,
            kappa_minus: Coefficient::PerCell(&km),
            alpha,
        };
        let ops = build_coupled_operators_with(disc, problem, &coeffs)?;
        let solver = TwoLevelSolver::new(&ops, &dd.solver)?;
        let rep = solver.run(dd)?.ensure_converged()?;
        Ok((rep.t_plus, rep.t_minus, rep.iterations, rep.global_solver_iterations))
    };

    let (mut t_plus, mut t_minus, it, kr) = solve(&temp_plus, &temp_minus)?;
    inner_iterations.push(it);
    solves += it + 1;
    krylov += kr;
    let mut history = Vec::new();
    for k in 1..=nl.picard_max {
        let temp_plus = centroid_values(&disc.global_mesh, &disc.global_dofs, &t_plus);
        let temp_minus = centroid_values(&disc.local_mesh, &disc.local_dofs, &t_minus);
        let (np, nm, it, kr) = solve(&temp_plus, &temp_minus)?;
        inner_iterations.push(it);
        solves += it + 1;
        krylov += kr;
        let np = relaxed(np, &t_plus, omega);
        let nm = relaxed(nm, &t_minus, omega);
        let change = stacked_change(&np, &nm, &t_plus, &t_minus);
        history.push(change);
        t_plus = np;
        t_minus = nm;
        log::debug!("picard (two-level) iteration {k}: change {:e}", change.to_f64_lossy());
        if change < T::lit(nl.picard_tol) {
            return Ok(PicardReport {
                picard_iterations: k,
                change_history: history,
                inner_iterations,
                mean_global_solver_iterations: krylov as f64 / solves as f64,
                time_s: start.elapsed().as_secs_f64(),
                t_plus,
                t_minus,
            });
        }
    }
    Err(Error::PicardNoConvergence {
        iterations: nl.picard_max,
        change: history.last().map_or(f64::NAN, |c| c.to_f64_lossy()),
    })
}

/// Picard iteration on a fitted mesh with `κ_A(T)` outside and `κ_B(T)`
/// inside the strip.
#[allow(clippy::too_many_arguments)]
pub fn picard_monolithic<T: Real>(
    geom: &GeometryConfig<T>,
    h_plus: T,
    h_minus: T,
    degree: usize,
    mode: RefinementMode,
    curves: &MaterialPair,
    nl: &NonlinearConfig,
    problem: &ProblemData<'_, T>,
    solver: &SolverConfig,
) -> Result<MonolithicPicardReport<T>> {
    nl.validate()?;
    let start = Instant::now();
    let mesh = build_fitted_mesh(geom, h_plus, h_minus, mode)?;
    let in_strip: Vec<bool> = (0..mesh.n_cells()).map(|c| geom.in_strip(&mesh.cell_centroid(c))).collect();
    let omega = T::lit(nl.damping);
    let mut krylov = 0usize;
    let mut solves = 0usize;
    let solve = |temps: &[T]| -> Result<FittedSolution<T>> {
        let kappa: Vec<T> = temps
            .iter()
            .zip(&in_strip)
            .map(|(&t, &s)| if s { curves.b.eval(t) } else { curves.a.eval(t) })
            .collect();
        solve_fitted(mesh.clone(), degree, Coefficient::PerCell(&kappa), problem, solver)
    };
    let mut sol = solve(&vec![problem.t_dirichlet; mesh.n_cells()])?;
    krylov += sol.solver_iterations;
    solves += 1;
    let mut history = Vec::new();
    for k in 1..=nl.picard_max {
        let temps = centroid_values(&sol.mesh, &sol.dofs, &sol.values);
        let mut next = solve(&temps)?;
        krylov += next.solver_iterations;
        solves += 1;
        next.values = relaxed(next.values, &sol.values, omega);
        let change = relative_l2(&next.values, &sol.values);
        history.push(change);
        sol = next;
        log::debug!("picard (monolithic) iteration {k}: change {:e}", change.to_f64_lossy());
        if change < T::lit(nl.picard_tol) {
            return Ok(MonolithicPicardReport {
                picard_iterations: k,
                change_history: history,
                mean_solver_iterations: krylov as f64 / solves as f64,
                time_s: start.elapsed().as_secs_f64(),
                solution: sol,
            });
        }
    }
    Err(Error::PicardNoConvergence {
        iterations: nl.picard_max,
        change: history.last().map_or(f64::NAN, |c| c.to_f64_lossy()),
    })
}

/// Area-weighted mean of `κ_B(T)` over the strip cells of a fitted solution.
pub fn strip_mean_conductivity<T: Real>(sol: &FittedSolution<T>, geom: &GeometryConfig<T>, curve: &MaterialCurve) -> T {
    let temps = centroid_values(&sol.mesh, &sol.dofs, &sol.values);
    let (mut num, mut den) = (T::zero(), T::zero());
    for (c, &t) in temps.iter().enumerate() {
        if geom.in_strip(&sol.mesh.cell_centroid(c)) {
            let v = sol.mesh.cell_volume(c);
            num += v * curve.eval(t);
            den += v;
        }
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_interpolates_and_clamps() {
        let c = MaterialCurve::new(vec![(0.0, 1.0), (10.0, 2.0), (20.0, 2.0)]).unwrap();
        assert_eq!(c.eval(-5.0f64), 1.0);
        assert_eq!(c.eval(5.0f64), 1.5);
        assert_eq!(c.eval(10.0f64), 2.0);
        assert_eq!(c.eval(50.0f64), 2.0);
        assert!(MaterialCurve::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(MaterialCurve::new(vec![(1.0, -1.0)]).is_err());
        assert!(MaterialCurve::new(vec![]).is_err());
    }

    #[test]
    fn curve_csv() {
        let c = MaterialCurve::from_csv("T,kappa\n293.15,0.2\n1000,0.5\n".as_bytes()).unwrap();
        assert_eq!(c.points(), &[(293.15, 0.2), (1000.0, 0.5)]);
        assert!(MaterialCurve::from_csv("temp,k\n1,1\n".as_bytes()).is_err());
        assert!(MaterialCurve::from_csv("T,kappa\n1,abc\n".as_bytes()).is_err());
    }
}
