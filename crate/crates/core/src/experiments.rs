//! Experiment drivers: κ sweeps with spectral fits, mesh-ratio sweeps,
//! relaxation studies, monolithic comparisons and report files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coupling::{build_coupled_operators, AlphaPolicy, CoupledOperators, Discretization, ProblemData};
use crate::dd::{run_fitted_reference, DDConfig, DDOutcome, RefinementMode, TwoLevelSolver};
use crate::error::{Error, Result};
use crate::linalg::{least_squares_fit, SolverConfig, SpectralFit};
use crate::mesh::GeometryConfig;
use crate::nonlinear::{
    picard_monolithic, picard_two_level, strip_mean_conductivity, MaterialCurve, MaterialPair, NonlinearConfig,
};

/// Power-iteration settings for spectral-radius estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 200_000, seed: 20_240_501 }
    }
}

/// Settings of the fitted monolithic reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonolithicConfig {
    pub mode: RefinementMode,
    pub solver: SolverConfig,
}

impl Default for MonolithicConfig {
    fn default() -> Self {
        Self { mode: RefinementMode::UniformFine, solver: SolverConfig::gmres(1e-10) }
    }
}

/// Declarative description of a study. Key names double as config-file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    /// Polynomial degree.
    pub m: usize,
    pub h_plus: f64,
    pub h_minus: Vec<f64>,
    pub kappa_plus: f64,
    pub kappa_minus: Vec<f64>,
    pub theta: Vec<f64>,
    pub alpha: AlphaPolicy,
    pub dd: DDConfig,
    pub power: PowerConfig,
    pub monolithic: MonolithicConfig,
    pub nonlinear: NonlinearStudy,
    /// Overrides the standard box when set.
    pub geometry: Option<GeometryConfig<f64>>,
    pub output_dir: PathBuf,
    /// Write the assembled operators in Matrix Market format.
    pub export_matrices: bool,
    /// Write plain-text dumps of the meshes.
    pub dump_mesh: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            m: 1,
            h_plus: 1.0 / 160.0,
            h_minus: vec![1.0 / 1280.0],
            kappa_plus: 1.0,
            kappa_minus: default_kappa_minus(),
            theta: vec![1.0],
            alpha: AlphaPolicy::default(),
            dd: DDConfig::default(),
            power: PowerConfig::default(),
            monolithic: MonolithicConfig::default(),
            nonlinear: NonlinearStudy::default(),
            geometry: None,
            output_dir: PathBuf::from("out"),
            export_matrices: false,
            dump_mesh: false,
        }
    }
}

/// `κ_− = 0.5^l` for `l = 1..8`.
pub fn default_kappa_minus() -> Vec<f64> {
    (1..=8).map(|l| 0.5f64.powi(l)).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_minus.is_empty() || self.kappa_minus.is_empty() || self.theta.is_empty() {
            return Err(Error::InvalidConfig("h_minus, kappa_minus and theta must be non-empty".into()));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.h_plus) || !positive(self.kappa_plus) {
            return Err(Error::InvalidConfig("h_plus and kappa_plus must be positive".into()));
        }
        if let Some(v) = self.h_minus.iter().chain(&self.kappa_minus).find(|v| !positive(**v)) {
            return Err(Error::InvalidConfig(format!("non-positive entry {v}")));
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidConfig(format!("theta {t} outside (0, 1]")));
        }
        self.alpha.validate()?;
        self.dd.validate()?;
        self.nonlinear.settings.validate()?;
        self.geometry().validate()
    }

    pub fn geometry(&self) -> GeometryConfig<f64> {
        self.geometry.unwrap_or_else(|| GeometryConfig::standard(self.dim))
    }

    pub fn cases(&self) -> Vec<Case> {
        self.h_minus.iter().map(|&hm| Case { dim: self.dim, m: self.m, h_plus: self.h_plus, h_minus: hm }).collect()
    }
}

/// One discretization: dimension, degree and mesh sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub dim: usize,
    pub m: usize,
    pub h_plus: f64,
    pub h_minus: f64,
}

impl Case {
    pub fn h_ratio(&self) -> f64 {
        self.h_plus / self.h_minus
    }

    pub fn id(&self) -> String {
        format!("d{}-m{}-r{}", self.dim, self.m, fmt_num(self.h_ratio()))
    }

    pub fn discretize(&self, geom: &GeometryConfig<f64>) -> Result<Discretization<f64>> {
        Discretization::new(geom, self.h_plus, self.h_minus, self.m)
    }
}

fn fmt_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}

/// One row of `records.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub case_id: String,
    pub dim: usize,
    pub m: usize,
    pub h_ratio: f64,
    pub kappa_ratio: f64,
    pub theta: f64,
    pub rho_measured: f64,
    pub rho_predicted: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub time_s: f64,
}

/// One row of `fits.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub case_id: String,
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(rename = "C_tilde")]
    pub c_tilde: f64,
}

impl FitRecord {
    pub fn new(case_id: &str, f: &SpectralFit<f64>) -> Self {
        Self { case_id: case_id.into(), a0: f.a0, a1: f.a1, b0: f.b0, b1: f.b1, b2: f.b2, c_tilde: f.c_tilde }
    }
}

/// Spectral estimate plus two-level run at one parameter point.
#[derive(Clone, Debug, Serialize)]
pub struct PointResult {
    pub kappa_ratio: f64,
    pub theta: f64,
    pub rho: f64,
    /// Signed Rayleigh quotient of the dominant direction.
    pub rayleigh: f64,
    pub power_iterations: usize,
    pub iterations: usize,
    pub outcome: DDOutcome,
    /// Coupled block residual of the final iterate.
    pub block_residual: f64,
    pub time_s: f64,
}

/// Assemble the operators of one case at `κ_−`.
pub fn assemble_case(
    cfg: &ExperimentConfig,
    disc: &Discretization<f64>,
    problem: &ProblemData<'_, f64>,
    kappa_minus: f64,
) -> Result<CoupledOperators<f64>> {
    build_coupled_operators(disc, problem, cfg.kappa_plus, kappa_minus, &cfg.alpha)
}

/// [`assemble_case`], writing the operators below `output_dir/matrices`
/// when `export_matrices` is set.
pub fn assemble_exported(
    cfg: &ExperimentConfig,
    case: &Case,
    disc: &Discretization<f64>,
    problem: &ProblemData<'_, f64>,
    kappa_minus: f64,
) -> Result<CoupledOperators<f64>> {
    let ops = assemble_case(cfg, disc, problem, kappa_minus)?;
    if cfg.export_matrices {
        ops.write_matrix_market(&cfg.output_dir.join("matrices").join(format!("{}-k{}", case.id(), kappa_minus)))?;
    }
    Ok(ops)
}

/// Estimate `ρ((1 − θ) I + θ M)` and run the two-level iteration.
pub fn run_point(cfg: &ExperimentConfig, ops: &CoupledOperators<f64>, kappa_ratio: f64, theta: f64) -> Result<PointResult> {
    let start = Instant::now();
    let solver = TwoLevelSolver::new(ops, &cfg.dd.solver)?;
    let est = solver.spectral_radius(theta, cfg.power.tol, cfg.power.max_iters, cfg.power.seed)?;
    let dd = DDConfig { theta, ..cfg.dd };
    let rep = solver.run(&dd)?;
    Ok(PointResult {
        kappa_ratio,
        theta,
        rho: est.rho,
        rayleigh: est.rayleigh,
        power_iterations: est.iterations,
        iterations: rep.iterations,
        outcome: rep.outcome,
        block_residual: ops.block_residual(&rep.t_plus, &rep.t_minus),
        time_s: start.elapsed().as_secs_f64(),
    })
}

/// Spectral fits over the points with `0 < x ≤ 1`.
pub fn fit_spectral_law(points: &[(f64, f64)]) -> Result<SpectralFit<f64>> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(x, _)| x > 0.0 && x <= 1.0).collect();
    SpectralFit::from_points(&pts)
}

/// Result of a κ sweep for one case.
#[derive(Clone, Debug)]
pub struct KappaSweep {
    pub case: Case,
    pub points: Vec<PointResult>,
    pub records: Vec<SweepRecord>,
    pub fit: Option<SpectralFit<f64>>,
    /// Set when the fit could not be computed.
    pub warning: Option<String>,
}

/// For every `κ_−` and `θ`: assemble, estimate `ρ`, run the two-level
/// iteration; then fit `ρ` against `κ_−/κ_+` on the `θ = 1` points (all
/// points when no `θ = 1` is configured).
pub fn sweep_kappa(cfg: &ExperimentConfig, case: &Case, problem: &ProblemData<'_, f64>) -> Result<KappaSweep> {
    let geom = cfg.geometry();
    let disc = case.discretize(&geom)?;
    let mut points = Vec::new();
    for &km in &cfg.kappa_minus {
        let ops = assemble_exported(cfg, case, &disc, problem, km)?;
        for &theta in &cfg.theta {
            let p = run_point(cfg, &ops, km / cfg.kappa_plus, theta)?;
            log::info!("{} κ ratio {:.6}: ρ = {:.6}, {} iterations ({:?})", case.id(), p.kappa_ratio, p.rho, p.iterations, p.outcome);
            points.push(p);
        }
    }
    let unrelaxed: Vec<&PointResult> = points.iter().filter(|p| p.theta == 1.0).collect();
    let fit_src: Vec<(f64, f64)> = if unrelaxed.is_empty() {
        points.iter().map(|p| (p.kappa_ratio, p.rho)).collect()
    } else {
        unrelaxed.iter().map(|p| (p.kappa_ratio, p.rho)).collect()
    };
    let (fit, warning) = match fit_spectral_law(&fit_src) {
        Ok(f) => (Some(f), None),
        Err(e @ Error::RankDeficient(_)) => {
            log::warn!("{}: spectral fit skipped: {e}", case.id());
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let records = points
        .iter()
        .map(|p| SweepRecord {
            case_id: case.id(),
            dim: case.dim,
            m: case.m,
            h_ratio: case.h_ratio(),
            kappa_ratio: p.kappa_ratio,
            theta: p.theta,
            rho_measured: p.rho,
            rho_predicted: fit.as_ref().map(|f| predict_relaxed(f, p.kappa_ratio, p.theta)),
            iterations: p.iterations,
            converged: p.outcome == DDOutcome::Converged,
            time_s: p.time_s,
        })
        .collect();
    Ok(KappaSweep { case: *case, points, records, fit, warning })
}

/// `|(1 − θ) + θ λ|` with the dominant eigenvalue modelled as `λ = a1 x + a0`.
pub fn predict_relaxed(fit: &SpectralFit<f64>, kappa_ratio: f64, theta: f64) -> f64 {
    let lambda = fit.a1 * kappa_ratio + fit.a0;
    ((1.0 - theta) + theta * lambda).abs()
}

/// `κ_−/κ_+ = 1/C̃ + 1`, where the unrelaxed model predicts `ρ = 1`.
pub fn predict_divergence_threshold(fit: &SpectralFit<f64>) -> Result<f64> {
    if !(fit.c_tilde > 0.0) {
        return Err(Error::NonpositiveConstant(fit.c_tilde));
    }
    Ok(1.0 / fit.c_tilde + 1.0)
}

/// `C̃` against mesh ratio with per-doubling increments and a log₂ slope.
#[derive(Clone, Debug, Serialize)]
pub struct MeshRatioTable {
    /// `(h_+/h_−, C̃)` sorted by ratio.
    pub rows: Vec<(f64, f64)>,
    /// `C̃(r_{i+1}) − C̃(r_i)`, normalized per doubling.
    pub increments: Vec<f64>,
    /// Slope of the least-squares line `C̃ ≈ s log₂ r + c`.
    pub log2_slope: f64,
}

impl MeshRatioTable {
    pub fn from_rows(mut rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::InsufficientRatios { needed: 3, got: rows.len() });
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let increments = rows.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 / w[0].0).log2()).collect();
        let pts: Vec<(f64, f64)> = rows.iter().map(|&(r, c)| (r.log2(), c)).collect();
        let log2_slope = least_squares_fit(&pts, 1)?.coefficients[1];
        Ok(Self { rows, increments, log2_slope })
    }

    /// `max/min` of the increments after the first doubling.
    pub fn increment_spread(&self) -> f64 {
        let rest = &self.increments[1..];
        let max = rest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = rest.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Run [`sweep_kappa`] for every configured `h_−` and tabulate `C̃`.
pub fn sweep_mesh_ratio(
    cfg: &ExperimentConfig,
    problem: &ProblemData<'_, f64>,
) -> Result<(Vec<KappaSweep>, MeshRatioTable)> {
    if cfg.h_minus.len() < 3 {
        return Err(Error::InsufficientRatios { needed: 3, got: cfg.h_minus.len() });
    }
    let mut sweeps = Vec::new();
    let mut rows = Vec::new();
    for case in cfg.cases() {
        let s = sweep_kappa(cfg, &case, problem)?;
        let fit = s.fit.ok_or_else(|| Error::RankDeficient(format!("no spectral fit for {}", case.id())))?;
        rows.push((case.h_ratio(), fit.c_tilde));
        sweeps.push(s);
    }
    Ok((sweeps, MeshRatioTable::from_rows(rows)?))
}

/// `θ` presets for a given `κ_−/κ_+ = x`.
pub mod theta_presets {
    /// Minimizer of the continuous contraction bound, `1 / ((x − 1)² + 1)`.
    pub fn parabola(kappa_ratio: f64) -> f64 {
        1.0 / ((kappa_ratio - 1.0).powi(2) + 1.0)
    }

    /// Empirical rule `κ_+/κ_−`, capped at 1.
    pub fn empirical(kappa_ratio: f64) -> f64 {
        (1.0 / kappa_ratio).min(1.0)
    }
}

/// One row of a relaxation study.
#[derive(Clone, Debug, Serialize)]
pub struct RelaxationRow {
    pub kappa_ratio: f64,
    pub theta: f64,
    pub rho_relaxed: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best: bool,
}

/// For every `κ_−` and `θ`, the relaxed spectral radius and the iteration
/// count; per `κ_−` the converged row with fewest iterations is marked best.
/// With `presets`, both [`theta_presets`] are added to the configured values.
pub fn relaxation_study(
    cfg: &ExperimentConfig,
    case: &Case,
    problem: &ProblemData<'_, f64>,
    presets: bool,
) -> Result<Vec<RelaxationRow>> {
    let disc = case.discretize(&cfg.geometry())?;
    let mut rows = Vec::new();
    for &km in &cfg.kappa_minus {
        let ops = assemble_exported(cfg, case, &disc, problem, km)?;
        let x = km / cfg.kappa_plus;
        let mut thetas = cfg.theta.clone();
        if presets {
            thetas.extend([theta_presets::parabola(x), theta_presets::empirical(x)]);
        }
        thetas.sort_by(f64::total_cmp);
        thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let first = rows.len();
        for theta in thetas {
            let p = run_point(cfg, &ops, x, theta)?;
            rows.push(RelaxationRow {
                kappa_ratio: p.kappa_ratio,
                theta,
                rho_relaxed: p.rho,
                iterations: p.iterations,
                converged: p.outcome == DDOutcome::Converged,
                best: false,
            });
        }
        let best = rows[first..]
            .iter()
            .enumerate()
            .filter(|(_, r)| r.converged)
            .min_by(|a, b| a.1.iterations.cmp(&b.1.iterations).then(a.1.rho_relaxed.total_cmp(&b.1.rho_relaxed)))
            .map(|(i, _)| first + i);
        if let Some(i) = best {
            rows[i].best = true;
        }
    }
    Ok(rows)
}

/// Spectral estimate without a two-level run.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRow {
    pub kappa_ratio: f64,
    pub theta: f64,
    pub rho: f64,
    pub rayleigh: f64,
    pub power_iterations: usize,
}

/// `ρ((1 − θ) I + θ M)` for every configured `κ_−` and `θ`.
pub fn spectrum(cfg: &ExperimentConfig, case: &Case, problem: &ProblemData<'_, f64>) -> Result<Vec<SpectrumRow>> {
    let disc = case.discretize(&cfg.geometry())?;
    let mut rows = Vec::new();
    for &km in &cfg.kappa_minus {
        let ops = assemble_exported(cfg, case, &disc, problem, km)?;
        let solver = TwoLevelSolver::new(&ops, &cfg.dd.solver)?;
        for &theta in &cfg.theta {
            let est = solver.spectral_radius(theta, cfg.power.tol, cfg.power.max_iters, cfg.power.seed)?;
            rows.push(SpectrumRow {
                kappa_ratio: km / cfg.kappa_plus,
                theta,
                rho: est.rho,
                rayleigh: est.rayleigh,
                power_iterations: est.iterations,
            });
        }
    }
    Ok(rows)
}

/// One row of the monolithic comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub kappa_ratio: f64,
    pub h_ratio: f64,
    pub dd_iterations: usize,
    pub dd_converged: bool,
    /// Krylov iterations per local solve.
    pub dd_local_solver_iterations: f64,
    /// Krylov iterations per global solve.
    pub dd_global_solver_iterations: f64,
    pub dd_time_s: f64,
    pub monolithic_iterations: Option<usize>,
    pub monolithic_converged: bool,
    pub monolithic_time_s: f64,
    /// Relative L² distance between the two-level and the monolithic solution.
    pub l2_difference: Option<f64>,
}

/// Two-level method against the fitted monolithic solver for every `κ_−`
/// and `h_−`, both using the configured Krylov settings.
pub fn compare_monolithic(cfg: &ExperimentConfig, problem: &ProblemData<'_, f64>) -> Result<Vec<ComparisonRow>> {
    let geom = cfg.geometry();
    let mut rows = Vec::new();
    for case in cfg.cases() {
        let disc = case.discretize(&geom)?;
        for &km in &cfg.kappa_minus {
            let ops = assemble_exported(cfg, &case, &disc, problem, km)?;
            let start = Instant::now();
            let solver = TwoLevelSolver::new(&ops, &cfg.monolithic.solver)?;
            let rep = solver.run(&DDConfig { solver: cfg.monolithic.solver, ..cfg.dd })?;
            let dd_time = start.elapsed().as_secs_f64();
            let n_local = rep.iterations + 1;
            let n_global = rep.iterations + 2;
            let mono = run_fitted_reference(
                &geom,
                case.h_plus,
                case.h_minus,
                cfg.kappa_plus,
                km,
                case.m,
                cfg.monolithic.mode,
                problem,
                &cfg.monolithic.solver,
            );
            let (mono_iters, mono_ok, mono_time, diff) = match &mono {
                Ok(sol) => {
                    let d = crate::dd::l2_distance(&sol.mesh, &sol.dofs, &sol.values, |x| {
                        crate::dd::eval_two_level(&disc, &rep.t_plus, &rep.t_minus, x)
                    })?;
                    let norm = crate::dd::l2_distance(&sol.mesh, &sol.dofs, &sol.values, |_| Ok(0.0))?;
                    (Some(sol.solver_iterations), true, sol.time_s, Some(d / norm))
                }
                Err(Error::NoConvergence { .. }) => (None, false, f64::NAN, None),
                Err(_) => return Err(mono.expect_err("error branch")),
            };
            rows.push(ComparisonRow {
                kappa_ratio: km / cfg.kappa_plus,
                h_ratio: case.h_ratio(),
                dd_iterations: rep.iterations,
                dd_converged: rep.converged,
                dd_local_solver_iterations: rep.local_solver_iterations as f64 / n_local as f64,
                dd_global_solver_iterations: rep.global_solver_iterations as f64 / n_global as f64,
                dd_time_s: dd_time,
                monolithic_iterations: mono_iters,
                monolithic_converged: mono_ok,
                monolithic_time_s: mono_time,
                l2_difference: diff,
            });
        }
    }
    Ok(rows)
}

/// Nonlinear study settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct NonlinearStudy {
    #[serde(flatten)]
    pub settings: NonlinearConfig,
    /// `T,kappa` CSV for the bulk material; synthetic curve when unset.
    pub curve_a: Option<PathBuf>,
    /// `T,kappa` CSV for the strip material; synthetic curve when unset.
    pub curve_b: Option<PathBuf>,
    /// Values of `κ_{+,B}` to sweep; only `settings.kappa_plus_b` when empty.
    pub sweep_kappa_plus_b: Vec<f64>,
}


impl NonlinearStudy {
    /// Curves from the configured files, synthetic ones otherwise.
    pub fn curves(&self) -> Result<MaterialPair> {
        let synth = MaterialPair::synthetic();
        let load = |p: &Option<PathBuf>, fallback: MaterialCurve| -> Result<MaterialCurve> {
            match p {
                Some(p) => MaterialCurve::from_csv(std::fs::File::open(p)?),
                None => Ok(fallback),
            }
        };
        Ok(MaterialPair { a: load(&self.curve_a, synth.a)?, b: load(&self.curve_b, synth.b)? })
    }

    pub fn kappa_plus_b_values(&self) -> Vec<f64> {
        if self.sweep_kappa_plus_b.is_empty() {
            vec![self.settings.kappa_plus_b]
        } else {
            self.sweep_kappa_plus_b.clone()
        }
    }
}

/// `n` equispaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Two-level Picard outcome at one `κ_{+,B}`.
#[derive(Clone, Debug, Serialize)]
pub struct NonlinearRow {
    pub kappa_plus_b: f64,
    pub converged: bool,
    pub picard_iterations: usize,
    /// Two-level iterations summed over all inner solves.
    pub total_inner_iterations: usize,
    pub time_s: f64,
    /// Relative L² distance to the monolithic solution.
    pub l2_difference: Option<f64>,
}

/// Sweep over `κ_{+,B}` plus the monolithic reference.
#[derive(Clone, Debug, Serialize)]
pub struct NonlinearSummary {
    pub rows: Vec<NonlinearRow>,
    /// Area-weighted mean of `κ_B(T)` over the strip in the monolithic solution.
    pub mu: f64,
    pub monolithic_picard_iterations: usize,
    pub argmin_picard: Option<f64>,
    pub argmin_total_inner: Option<f64>,
}

/// Nested Picard with the two-level solver for every `κ_{+,B}`, compared
/// with Picard on a fitted mesh.
pub fn nonlinear_study(cfg: &ExperimentConfig, case: &Case, problem: &ProblemData<'_, f64>) -> Result<NonlinearSummary> {
    let geom = cfg.geometry();
    let disc = case.discretize(&geom)?;
    let curves = cfg.nonlinear.curves()?;
    let mono = picard_monolithic(
        &geom,
        case.h_plus,
        case.h_minus,
        case.m,
        cfg.monolithic.mode,
        &curves,
        &cfg.nonlinear.settings,
        problem,
        &cfg.monolithic.solver,
    )?;
    let mu = strip_mean_conductivity(&mono.solution, &geom, &curves.b);
    let mono_norm = crate::dd::l2_distance(&mono.solution.mesh, &mono.solution.dofs, &mono.solution.values, |_| Ok(0.0))?;
    let mut rows = Vec::new();
    for kpb in cfg.nonlinear.kappa_plus_b_values() {
        let nl = NonlinearConfig { kappa_plus_b: kpb, ..cfg.nonlinear.settings };
        let row = match picard_two_level(&disc, &curves, &nl, &cfg.dd, problem) {
            Ok(rep) => {
                let d = crate::dd::l2_distance(&mono.solution.mesh, &mono.solution.dofs, &mono.solution.values, |x| {
                    crate::dd::eval_two_level(&disc, &rep.t_plus, &rep.t_minus, x)
                })?;
                NonlinearRow {
                    kappa_plus_b: kpb,
                    converged: true,
                    picard_iterations: rep.picard_iterations,
                    total_inner_iterations: rep.total_inner_iterations(),
                    time_s: rep.time_s,
                    l2_difference: Some(d / mono_norm),
                }
            }
            Err(e @ (Error::PicardNoConvergence { .. } | Error::Diverged { .. } | Error::MaxItersExceeded { .. })) => {
                log::warn!("κ_+B = {kpb}: {e}");
                NonlinearRow {
                    kappa_plus_b: kpb,
                    converged: false,
                    picard_iterations: 0,
                    total_inner_iterations: 0,
                    time_s: f64::NAN,
                    l2_difference: None,
                }
            }
            Err(e) => return Err(e),
        };
        log::info!("κ_+B = {kpb}: {} Picard, {} inner iterations", row.picard_iterations, row.total_inner_iterations);
        rows.push(row);
    }
    let argmin = |key: fn(&NonlinearRow) -> usize| {
        rows.iter().filter(|r| r.converged).min_by_key(|r| key(r)).map(|r| r.kappa_plus_b)
    };
    Ok(NonlinearSummary {
        argmin_picard: argmin(|r| r.picard_iterations),
        argmin_total_inner: argmin(|r| r.total_inner_iterations),
        mu,
        monolithic_picard_iterations: mono.picard_iterations,
        rows,
    })
}

/// Write `records.csv`, `fits.csv` and `manifest.json` into `outdir`.
pub fn emit_reports(
    records: &[SweepRecord],
    fits: &[FitRecord],
    outdir: &Path,
    manifest: &serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    write_csv(&outdir.join("records.csv"), records, RECORD_HEADER)?;
    write_csv(&outdir.join("fits.csv"), fits, FIT_HEADER)?;
    let f = std::fs::File::create(outdir.join("manifest.json"))?;
    serde_json::to_writer_pretty(f, manifest)?;
    Ok(())
}

pub const RECORD_HEADER: &[&str] = &[
    "case_id",
    "dim",
    "m",
    "h_ratio",
    "kappa_ratio",
    "theta",
    "rho_measured",
    "rho_predicted",
    "iterations",
    "converged",
    "time_s",
];
pub const FIT_HEADER: &[&str] = &["case_id", "a0", "a1", "b0", "b1", "b2", "C_tilde"];

/// Serialize rows with an explicit header so that empty tables still carry it.
pub fn write_csv<S: Serialize>(path: &Path, rows: &[S], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Configuration echo, seed and crate version for `manifest.json`.
pub fn manifest(command: &str, cfg: &ExperimentConfig, extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.power.seed,
        "config": cfg,
        "results": extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_threshold() {
        let f = |c: f64| SpectralFit { a0: c, a1: -c, b0: c, b1: -c, b2: 0.0, c_tilde: c, r_squared_linear: 1.0 };
        assert!((predict_divergence_threshold(&f(0.4637)).unwrap() - 3.1565).abs() < 1e-3);
        assert_eq!(predict_divergence_threshold(&f(1.0)).unwrap(), 2.0);
        assert_eq!(predict_divergence_threshold(&f(0.5)).unwrap(), 3.0);
        assert!(matches!(predict_divergence_threshold(&f(0.0)), Err(Error::NonpositiveConstant(_))));
    }

    #[test]
    fn relaxed_prediction_vanishes_at_empirical_theta() {
        let c = 0.5;
        let f = SpectralFit { a0: c, a1: -c, b0: c, b1: -c, b2: 0.0, c_tilde: c, r_squared_linear: 1.0 };
        // λ = C̃ (1 − x) = −1 at x = 3; θ = 1/2 cancels it
        assert!(predict_relaxed(&f, 3.0, 0.5).abs() < 1e-15);
        assert!((predict_relaxed(&f, 0.5, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn case_ids() {
        let c = Case { dim: 2, m: 2, h_plus: 1.0 / 160.0, h_minus: 1.0 / 1280.0 };
        assert_eq!(c.id(), "d2-m2-r8");
    }
}
