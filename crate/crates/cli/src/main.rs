use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use twolevel_dd::coupling::{AlphaPolicy, ProblemData};
use twolevel_dd::dd::{write_solution_csv, RefinementMode, TwoLevelSolver};
use twolevel_dd::experiments::{self as exp, Case, ExperimentConfig, FitRecord, SweepRecord};
use twolevel_dd::linalg::SolverConfig;

#[derive(Parser, Debug)]
#[command(name = "twolevel", version, about = "Two-level domain-decomposition experiments")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one two-level solve and write the solution and report.
    Solve,
    /// Spectral radius of the iteration operator for every κ_− and θ.
    Spectrum,
    /// Spectral radius and iteration counts against κ_−, with linear and quadratic fits.
    SweepKappa,
    /// Repeat the κ sweep for every h_− and tabulate C̃ against h_+/h_−.
    SweepMesh,
    /// Relaxed spectral radii and iteration counts for every θ.
    RelaxStudy {
        /// Also try θ = κ_+/κ_− and θ = 1/((κ_−/κ_+ − 1)² + 1).
        #[arg(long)]
        presets: bool,
    },
    /// Two-level method against a fitted monolithic Krylov solve.
    CompareMonolithic,
    /// Temperature-dependent conductivity with Picard iteration.
    Nonlinear(NonlinearArgs),
}

#[derive(Args, Debug)]
struct NonlinearArgs {
    /// `T,kappa` CSV of the bulk material.
    #[arg(long)]
    curve_a: Option<PathBuf>,
    /// `T,kappa` CSV of the strip material.
    #[arg(long)]
    curve_b: Option<PathBuf>,
    #[arg(long)]
    kappa_plus_b: Option<f64>,
    /// `lo:hi:n`
    #[arg(long, value_parser = parse_range)]
    sweep_kappa_plus_b: Option<(f64, f64, usize)>,
    #[arg(long)]
    picard_tol: Option<f64>,
    #[arg(long)]
    picard_max: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Direct,
    Gmres,
    Cg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeshModeArg {
    UniformFine,
    Graded,
}

#[derive(Args, Debug)]
struct Overrides {
    /// TOML configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Polynomial degree.
    #[arg(long, short, global = true)]
    m: Option<usize>,
    /// Accepts fractions such as `1/160`.
    #[arg(long, global = true, value_parser = parse_number)]
    h_plus: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_number)]
    h_minus: Option<Vec<f64>>,
    /// Sets h_− = h_+/r for each ratio; overrides --h-minus.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_number)]
    h_ratio: Option<Vec<f64>>,
    #[arg(long, global = true, value_parser = parse_number)]
    kappa_plus: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_number)]
    kappa_minus: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_number)]
    theta: Option<Vec<f64>>,
    /// Two-level stopping tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// α = factor · max(1, κ_−) / h_−
    #[arg(long, global = true, conflicts_with = "alpha")]
    alpha_factor: Option<f64>,
    /// Fixed penalty α.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Inner solver of the two-level method.
    #[arg(long, global = true)]
    solver: Option<SolverArg>,
    #[arg(long, global = true)]
    solver_tol: Option<f64>,
    /// Mesh of the monolithic reference.
    #[arg(long, global = true)]
    mono_mode: Option<MeshModeArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write K_+, K_−, S and D in Matrix Market format.
    #[arg(long, global = true)]
    export_matrices: bool,
    /// Write plain-text dumps of both meshes.
    #[arg(long, global = true)]
    dump_mesh: bool,
}

fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            Ok(a / b)
        }
        None => s.parse().map_err(|e| format!("{s}: {e}")),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("expected lo:hi:n, got {s}"));
    };
    let n: usize = n.parse().map_err(|e| format!("{n}: {e}"))?;
    if n == 0 {
        return Err("n must be positive".into());
    }
    Ok((parse_number(lo)?, parse_number(hi)?, n))
}

fn load_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &o.output {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = o.dim {
        cfg.dim = v;
    }
    if let Some(v) = o.m {
        cfg.m = v;
    }
    if let Some(v) = o.h_plus {
        cfg.h_plus = v;
    }
    if let Some(v) = &o.h_minus {
        cfg.h_minus = v.clone();
    }
    if let Some(r) = &o.h_ratio {
        cfg.h_minus = r.iter().map(|r| cfg.h_plus / r).collect();
    }
    if let Some(v) = o.kappa_plus {
        cfg.kappa_plus = v;
    }
    if let Some(v) = &o.kappa_minus {
        cfg.kappa_minus = v.clone();
    }
    if let Some(v) = &o.theta {
        cfg.theta = v.clone();
    }
    if let Some(v) = o.tol {
        cfg.dd.tol = v;
    }
    if let Some(v) = o.max_iters {
        cfg.dd.max_iters = v;
    }
    if let Some(v) = o.alpha_factor {
        cfg.alpha = AlphaPolicy::Scaled { factor: v };
    }
    if let Some(v) = o.alpha {
        cfg.alpha = AlphaPolicy::Fixed { value: v };
    }
    if let Some(v) = o.solver {
        let tol = o.solver_tol.unwrap_or(cfg.dd.solver.rel_tol);
        cfg.dd.solver = match v {
            SolverArg::Direct => SolverConfig::direct(),
            SolverArg::Gmres => SolverConfig::gmres(tol),
            SolverArg::Cg => SolverConfig::cg(tol),
        };
    } else if let Some(t) = o.solver_tol {
        cfg.dd.solver.rel_tol = t;
    }
    if let Some(v) = o.mono_mode {
        cfg.monolithic.mode = match v {
            MeshModeArg::UniformFine => RefinementMode::UniformFine,
            MeshModeArg::Graded => RefinementMode::Graded,
        };
    }
    if let Some(v) = o.seed {
        cfg.power.seed = v;
    }
    cfg.export_matrices |= o.export_matrices;
    cfg.dump_mesh |= o.dump_mesh;
    Ok(cfg)
}

fn apply_nonlinear(cfg: &mut ExperimentConfig, a: &NonlinearArgs) {
    let nl = &mut cfg.nonlinear;
    if a.curve_a.is_some() {
        nl.curve_a = a.curve_a.clone();
    }
    if a.curve_b.is_some() {
        nl.curve_b = a.curve_b.clone();
    }
    if let Some(v) = a.kappa_plus_b {
        nl.settings.kappa_plus_b = v;
    }
    if let Some((lo, hi, n)) = a.sweep_kappa_plus_b {
        nl.sweep_kappa_plus_b = exp::linspace(lo, hi, n);
    }
    if let Some(v) = a.picard_tol {
        nl.settings.picard_tol = v;
    }
    if let Some(v) = a.picard_max {
        nl.settings.picard_max = v;
    }
}

fn dump_meshes(cfg: &ExperimentConfig, case: &Case) -> Result<()> {
    let disc = case.discretize(&cfg.geometry())?;
    let dir = cfg.output_dir.join("meshes");
    std::fs::create_dir_all(&dir)?;
    let id = case.id();
    disc.global_mesh.write_dump(BufWriter::new(File::create(dir.join(format!("{id}-global.txt")))?))?;
    disc.local_mesh.write_dump(BufWriter::new(File::create(dir.join(format!("{id}-local.txt")))?))?;
    Ok(())
}

fn first_case(cfg: &ExperimentConfig) -> Case {
    cfg.cases()[0]
}

fn run_solve(cfg: &ExperimentConfig, problem: &ProblemData<'_, f64>) -> Result<()> {
    let case = first_case(cfg);
    let km = cfg.kappa_minus[0];
    let theta = cfg.theta[0];
    let disc = case.discretize(&cfg.geometry())?;
    let ops = exp::assemble_case(cfg, &disc, problem, km)?;
    if cfg.export_matrices {
        ops.write_matrix_market(&cfg.output_dir.join("matrices"))?;
    }
    let solver = TwoLevelSolver::new(&ops, &cfg.dd.solver)?;
    let rep = solver.run(&twolevel_dd::dd::DDConfig { theta, ..cfg.dd })?;
    let out = &cfg.output_dir;
    write_solution_csv(BufWriter::new(File::create(out.join("solution_plus.csv"))?), &disc.global_dofs, &rep.t_plus)?;
    write_solution_csv(BufWriter::new(File::create(out.join("solution_minus.csv"))?), &disc.local_dofs, &rep.t_minus)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("report.json"))?), &rep)?;
    let record = SweepRecord {
        case_id: case.id(),
        dim: case.dim,
        m: case.m,
        h_ratio: case.h_ratio(),
        kappa_ratio: km / cfg.kappa_plus,
        theta,
        rho_measured: rep.rho_estimate.unwrap_or(f64::NAN),
        rho_predicted: None,
        iterations: rep.iterations,
        converged: rep.converged,
        time_s: rep.time_s,
    };
    exp::emit_reports(&[record], &[], out, &exp::manifest("solve", cfg, json!({ "outcome": rep.outcome })))?;
    println!(
        "{}: {:?} after {} iterations, block residual {:.3e}",
        case.id(),
        rep.outcome,
        rep.iterations,
        ops.block_residual(&rep.t_plus, &rep.t_minus)
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.overrides)?;
    if let Command::Nonlinear(a) = &cli.command {
        apply_nonlinear(&mut cfg, a);
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    if cfg.dump_mesh {
        for case in cfg.cases() {
            dump_meshes(&cfg, &case)?;
        }
    }
    let geom = cfg.geometry();
    let problem = ProblemData::laser(&geom);

    match &cli.command {
        Command::Solve => run_solve(&cfg, &problem)?,
        Command::Spectrum => {
            let case = first_case(&cfg);
            let rows = exp::spectrum(&cfg, &case, &problem)?;
            exp::write_csv(&out.join("spectrum.csv"), &rows, &["kappa_ratio", "theta", "rho", "rayleigh", "power_iterations"])?;
            for r in &rows {
                println!("x = {:<10.6} θ = {:<8.4} ρ = {:.6} (λ = {:+.6})", r.kappa_ratio, r.theta, r.rho, r.rayleigh);
            }
            exp::emit_reports(&[], &[], &out, &exp::manifest("spectrum", &cfg, json!({ "case": case.id() })))?;
        }
        Command::SweepKappa => {
            let mut records = Vec::new();
            let mut fits = Vec::new();
            let mut summary = Vec::new();
            for case in cfg.cases() {
                let s = exp::sweep_kappa(&cfg, &case, &problem)?;
                records.extend(s.records.iter().cloned());
                if let Some(f) = &s.fit {
                    fits.push(FitRecord::new(&case.id(), f));
                    let threshold = exp::predict_divergence_threshold(f).ok();
                    println!("{}: C̃ = {:.4}, divergence predicted at κ_−/κ_+ = {:?}", case.id(), f.c_tilde, threshold);
                    summary.push(json!({ "case": case.id(), "c_tilde": f.c_tilde, "divergence_threshold": threshold }));
                } else {
                    summary.push(json!({ "case": case.id(), "warning": s.warning }));
                }
            }
            exp::emit_reports(&records, &fits, &out, &exp::manifest("sweep-kappa", &cfg, json!(summary)))?;
        }
        Command::SweepMesh => {
            let (sweeps, table) = exp::sweep_mesh_ratio(&cfg, &problem)?;
            let records: Vec<SweepRecord> = sweeps.iter().flat_map(|s| s.records.iter().cloned()).collect();
            let fits: Vec<FitRecord> =
                sweeps.iter().filter_map(|s| s.fit.as_ref().map(|f| FitRecord::new(&s.case.id(), f))).collect();
            let rows: Vec<(f64, f64)> = table.rows.clone();
            exp::write_csv(&out.join("mesh_ratio.csv"), &rows, &["h_ratio", "C_tilde"])?;
            for (r, c) in &rows {
                println!("h_+/h_− = {r:<4} C̃ = {c:.4}");
            }
            println!("increments per doubling {:?}, log2 slope {:.4}", table.increments, table.log2_slope);
            exp::emit_reports(&records, &fits, &out, &exp::manifest("sweep-mesh", &cfg, json!(table)))?;
        }
        Command::RelaxStudy { presets } => {
            let case = first_case(&cfg);
            let rows = exp::relaxation_study(&cfg, &case, &problem, *presets)?;
            exp::write_csv(
                &out.join("relaxation.csv"),
                &rows,
                &["kappa_ratio", "theta", "rho_relaxed", "iterations", "converged", "best"],
            )?;
            for r in rows.iter().filter(|r| r.best) {
                println!("x = {:<10.6} best θ = {:.4}: {} iterations, ρ = {:.4}", r.kappa_ratio, r.theta, r.iterations, r.rho_relaxed);
            }
            let records: Vec<SweepRecord> = rows
                .iter()
                .map(|r| SweepRecord {
                    case_id: case.id(),
                    dim: case.dim,
                    m: case.m,
                    h_ratio: case.h_ratio(),
                    kappa_ratio: r.kappa_ratio,
                    theta: r.theta,
                    rho_measured: r.rho_relaxed,
                    rho_predicted: None,
                    iterations: r.iterations,
                    converged: r.converged,
                    time_s: f64::NAN,
                })
                .collect();
            exp::emit_reports(&records, &[], &out, &exp::manifest("relax-study", &cfg, json!({ "presets": presets })))?;
        }
        Command::CompareMonolithic => {
            let rows = exp::compare_monolithic(&cfg, &problem)?;
            exp::write_csv(
                &out.join("comparison.csv"),
                &rows,
                &[
                    "kappa_ratio",
                    "h_ratio",
                    "dd_iterations",
                    "dd_converged",
                    "dd_local_solver_iterations",
                    "dd_global_solver_iterations",
                    "dd_time_s",
                    "monolithic_iterations",
                    "monolithic_converged",
                    "monolithic_time_s",
                    "l2_difference",
                ],
            )?;
            for r in &rows {
                println!(
                    "x = {:<10.6} r = {:<3} two-level {} it ({:.1}/{:.1} Krylov per local/global solve), monolithic {:?} Krylov it",
                    r.kappa_ratio,
                    r.h_ratio,
                    r.dd_iterations,
                    r.dd_local_solver_iterations,
                    r.dd_global_solver_iterations,
                    r.monolithic_iterations
                );
            }
            exp::emit_reports(&[], &[], &out, &exp::manifest("compare-monolithic", &cfg, json!(rows)))?;
        }
        Command::Nonlinear(_) => {
            let case = first_case(&cfg);
            let summary = exp::nonlinear_study(&cfg, &case, &problem)?;
            exp::write_csv(
                &out.join("nonlinear.csv"),
                &summary.rows,
                &["kappa_plus_b", "converged", "picard_iterations", "total_inner_iterations", "time_s", "l2_difference"],
            )?;
            println!(
                "μ = {:.4}; fewest Picard iterations at κ_+B = {:?}, fewest inner iterations at κ_+B = {:?}",
                summary.mu, summary.argmin_picard, summary.argmin_total_inner
            );
            exp::emit_reports(&[], &[], &out, &exp::manifest("nonlinear", &cfg, json!(summary)))?;
        }
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
