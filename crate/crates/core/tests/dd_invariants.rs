use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twolevel_dd::coupling::{build_coupled_operators, AlphaPolicy, CoupledOperators, Discretization, ProblemData};
use twolevel_dd::dd::{block_gauss_seidel, neumann_partial_sum, run_coupled_direct, DDConfig, DDOutcome, TwoLevelSolver};
use twolevel_dd::linalg::{dense_spectral_radius, SolverConfig};
use twolevel_dd::mesh::GeometryConfig;
use twolevel_dd::scalar::{diff_norm, relative_l2};
use twolevel_dd::Error;

fn ops(m: usize, h_minus: f64, kp: f64, km: f64) -> CoupledOperators<f64> {
    let g = GeometryConfig::standard(2);
    let d = Discretization::new(&g, 1.0 / 160.0, h_minus, m).unwrap();
    build_coupled_operators(&d, &ProblemData::laser(&g), kp, km, &AlphaPolicy::default()).unwrap()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn sweeps_reproduce_block_gauss_seidel() {
    for (m, theta) in [(1, 1.0), (2, 1.0), (1, 0.6), (2, 0.35)] {
        let o = ops(m, 1.0 / 640.0, 1.0, 0.3);
        let solver = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap();
        let t0 = solver.step0().unwrap();
        let oracle = block_gauss_seidel(&o, theta, &t0, 10).unwrap();
        let mut t = t0;
        for (k, want) in oracle.iter().enumerate() {
            t = solver.sweep(&t, theta).unwrap().0;
            assert!(max_rel(&t, want) <= 1e-12, "m={m} θ={theta} iterate {}", k + 1);
        }
    }
}

#[test]
fn unrelaxed_iterates_are_neumann_partial_sums() {
    let o = ops(2, 1.0 / 640.0, 1.0, 0.2);
    let solver = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap();
    let t0 = solver.step0().unwrap();
    let mut t = t0.clone();
    for k in 1..=5 {
        t = solver.sweep(&t, 1.0).unwrap().0;
        let closed = neumann_partial_sum(&solver, k, &t0).unwrap();
        assert!(max_rel(&t, &closed) < 1e-11, "k={k}");
    }
    assert!(neumann_partial_sum(&solver, 0, &t0).is_err());
}

#[test]
fn converged_run_solves_the_coupled_system() {
    for m in [1, 2] {
        let o = ops(m, 1.0 / 640.0, 1.0, 0.25);
        let report = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap().run(&DDConfig::default()).unwrap();
        assert!(report.converged);
        assert!(o.block_residual(&report.t_plus, &report.t_minus) <= 10.0 * DDConfig::default().tol);
        let (tp, tm) = run_coupled_direct(&o).unwrap();
        assert!(relative_l2(&report.t_plus, &tp) < 1e-7);
        assert!(relative_l2(&report.t_minus, &tm) < 1e-7);
        // up to round-off amplified by the penalty stiffness
        let solver = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap();
        let (next, _) = solver.sweep(&tp, 1.0).unwrap();
        let fp = relative_l2(&next, &tp);
        assert!(fp < 1e-10, "m={m}: {fp:e}");
    }
}

#[test]
fn divergence_grows_at_the_spectral_radius() {
    let o = ops(1, 1.0 / 640.0, 1.0, 8.0);
    let rho = dense_spectral_radius(&o.k_plus, &o.s, &o.k_minus, &o.d, 1.0).unwrap();
    assert!(rho > 1.05, "ρ = {rho}");
    let cfg = DDConfig { max_iters: 2000, ..DDConfig::default() };
    let report = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap().run(&cfg).unwrap();
    assert_eq!(report.outcome, DDOutcome::Diverged);
    let h = &report.difference_history;
    assert!(*h.last().unwrap() > cfg.divergence_guard * h[0]);
    let n = h.len();
    let ratio = (h[n - 1] / h[n - 4]).powf(1.0 / 3.0);
    assert!((ratio - rho).abs() <= 0.1 * rho, "growth {ratio} vs ρ {rho}");
    assert!(matches!(report.ensure_converged(), Err(Error::Diverged { .. })));
}

#[test]
fn equal_conductivities_decouple() {
    for m in [1, 2] {
        let o = ops(m, 1.0 / 640.0, 0.7, 0.7);
        assert!(o.s.is_zero());
        let report = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap().run(&DDConfig::default()).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 2, "{} iterations", report.iterations);
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let o = ops(1, 1.0 / 320.0, 1.0, 0.5);
    let solver = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap();
    for theta in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(matches!(solver.run(&DDConfig::with_theta(theta)), Err(Error::InvalidConfig(_))), "θ={theta}");
    }
    let bad_tol = DDConfig { tol: 0.0, ..DDConfig::default() };
    assert!(solver.run(&bad_tol).is_err());
    let short = vec![0.0; o.n_plus() - 1];
    assert!(matches!(solver.run_from(&DDConfig::default(), Some(&short)), Err(Error::DimensionMismatch(_))));
}

#[test]
fn max_iterations_is_reported() {
    let o = ops(1, 1.0 / 640.0, 1.0, 0.1);
    let cfg = DDConfig { max_iters: 3, tol: 1e-14, ..DDConfig::default() };
    let report = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap().run(&cfg).unwrap();
    assert_eq!(report.outcome, DDOutcome::MaxIters);
    assert_eq!(report.iterations, 3);
    assert!(matches!(report.ensure_converged(), Err(Error::MaxItersExceeded { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn contraction_converges_and_reports_consistently(
        km in 0.05f64..0.95,
        theta in 0.4f64..=1.0,
        m in 1usize..=2,
    ) {
        let o = ops(m, 1.0 / 640.0, 1.0, km);
        let rho = dense_spectral_radius(&o.k_plus, &o.s, &o.k_minus, &o.d, theta).unwrap();
        prop_assume!(rho < 0.9);
        let cfg = DDConfig::with_theta(theta);
        let r = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap().run(&cfg).unwrap();
        prop_assert!(r.converged);
        prop_assert_eq!(r.outcome, DDOutcome::Converged);
        prop_assert_eq!(r.residual_history.len(), r.iterations);
        prop_assert_eq!(r.difference_history.len(), r.iterations);
        prop_assert!(*r.residual_history.last().unwrap() < cfg.tol);
        prop_assert!(r.residual_history[..r.iterations - 1].iter().all(|&v| v >= cfg.tol));
        prop_assert_eq!(r.t_plus.len(), o.n_plus());
        prop_assert_eq!(r.t_minus.len(), o.n_minus());
        // differences contract geometrically at no more than ρ
        let h = &r.difference_history;
        if h.len() >= 6 {
            let n = h.len();
            let ratio = (h[n - 1] / h[n - 5]).powf(0.25);
            prop_assert!(ratio <= rho * 1.1 + 1e-3, "ratio {} vs ρ {}", ratio, rho);
        }
        let (tp, _) = run_coupled_direct(&o).unwrap();
        prop_assert!(diff_norm(&r.t_plus, &tp) / tp.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
    }

    #[test]
    fn homogeneous_sweeps_contract_in_energy(km in 0.05f64..2.0, m in 1usize..=2, seed in any::<u64>()) {
        prop_assume!((km - 1.0).abs() > 1e-3);
        let g = GeometryConfig::standard(2);
        let d = Discretization::new(&g, 1.0 / 160.0, 1.0 / 320.0, m).unwrap();
        let o = build_coupled_operators(&d, &ProblemData::homogeneous(), 1.0, km, &AlphaPolicy::default()).unwrap();
        let solver = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t: Vec<f64> = (0..o.n_plus()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &i in &o.dirichlet_plus {
            t[i] = 0.0;
        }
        let energy = |v: &[f64]| v.iter().zip(o.k_plus.mul_vec(v)).map(|(a, b)| a * b).sum::<f64>().sqrt();
        let e0 = energy(&t);
        let mut e = e0;
        for k in 0..20 {
            t = solver.sweep(&t, 1.0).unwrap().0;
            let next = energy(&t);
            if e < 1e-12 * e0 {
                break;
            }
            prop_assert!(next < e, "step {}: {} then {}", k, e, next);
            e = next;
        }
    }
}
