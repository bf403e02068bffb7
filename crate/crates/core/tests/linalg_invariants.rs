use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twolevel_dd::coupling::{build_coupled_operators, AlphaPolicy, Discretization, ProblemData};
use twolevel_dd::dd::TwoLevelSolver;
use twolevel_dd::linalg::{
    conjugate_gradient, dense_matrix_spectral_radius, dense_spectral_radius, gmres, least_squares_fit,
    relax_in_place, DenseMatrix, SolverConfig, SparseMatrix, SpectralFit,
};
use twolevel_dd::mesh::GeometryConfig;

/// Upper triangular matrix with the given diagonal and random coupling above it.
fn triangular(diag: &[f64], seed: u64) -> DenseMatrix<f64> {
    let n = diag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        for j in i + 1..n {
            m[(i, j)] = rng.gen_range(-0.2..0.2);
        }
    }
    m
}

fn laplacian_1d(n: usize) -> SparseMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0));
        if i > 0 {
            t.push((i, i - 1, -1.0));
            t.push((i - 1, i, -1.0));
        }
    }
    SparseMatrix::from_triplets(n, n, &t)
}

#[test]
fn power_iteration_agrees_with_dense_eigenvalues() {
    let g = GeometryConfig::standard(2);
    for m in [1, 2] {
        let d = Discretization::new(&g, 1.0 / 160.0, 1.0 / 640.0, m).unwrap();
        for (km, theta) in [(0.5f64, 1.0f64), (0.125, 1.0), (0.25, 0.7), (0.03125, 0.5)] {
            let o = build_coupled_operators(&d, &ProblemData::laser(&g), 1.0, km, &AlphaPolicy::default()).unwrap();
            let solver = TwoLevelSolver::new(&o, &SolverConfig::direct()).unwrap();
            let power = solver.spectral_radius(theta, 1e-12, 200_000, 7).unwrap();
            let dense = dense_spectral_radius(&o.k_plus, &o.s, &o.k_minus, &o.d, theta).unwrap();
            assert!((power.rho - dense).abs() <= 1e-6 * dense.max(1e-3), "m={m} κ−={km} θ={theta}: {} vs {dense}", power.rho);
        }
    }
}

#[test]
fn exact_linear_law_is_recovered() {
    // ρ(x) = 0.3 |x − 1| injected through the eigenvalues of a dense operator
    let points: Vec<(f64, f64)> = (1..=8)
        .map(|k| {
            let x = k as f64 / 8.0;
            let lam = 0.3 * (1.0 - x);
            let m = triangular(&[-lam, 0.5 * lam, 0.2 * lam, -0.1 * lam], k);
            (x, dense_matrix_spectral_radius(&m).unwrap())
        })
        .collect();
    let fit = SpectralFit::from_points(&points).unwrap();
    assert!((fit.a1 + 0.3).abs() < 1e-10, "a1 = {}", fit.a1);
    assert!((fit.a0 - 0.3).abs() < 1e-10);
    assert!((fit.c_tilde - 0.3).abs() < 1e-10);
    assert!(fit.b2.abs() < 1e-9);
    assert!((fit.r_squared_linear - 1.0).abs() < 1e-12);
    assert!((fit.predict(3.0) - 0.6).abs() < 1e-10);
}

#[test]
fn cg_error_in_energy_norm_never_increases() {
    let n = 60;
    let a = laplacian_1d(n);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let exact: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = a.mul_vec(&exact);
    let energy = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&exact).map(|(p, q)| p - q).collect();
        e.iter().zip(a.mul_vec(&e)).map(|(p, q)| p * q).sum::<f64>().sqrt()
    };
    // each tolerance stops the same iteration sequence at a later checkpoint
    let mut last = (f64::INFINITY, 0);
    for k in 1..=10 {
        let (x, iters) = conjugate_gradient(&a, &b, None, None, 10f64.powi(-k), 10 * n).unwrap();
        let err = energy(&x);
        assert!(iters >= last.1);
        assert!(err <= last.0 * (1.0 + 1e-12), "tol 1e-{k}: {err} after {:?}", last);
        last = (err, iters);
    }
    assert!(last.0 < 1e-8);
}

#[test]
fn gmres_solves_a_nonsymmetric_system() {
    let n = 40;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 4.0));
        if i > 0 {
            t.push((i, i - 1, -1.5));
        }
        if i + 1 < n {
            t.push((i, i + 1, -0.5));
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t);
    let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
    let b = a.mul_vec(&exact);
    let (x, _) = gmres(&a, &b, None, None, 1e-12, 500, 10).unwrap();
    let err = x.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10);
}

#[test]
fn duplicate_triplets_are_summed() {
    let a = SparseMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 4.0), (0, 1, 2.5), (1, 0, -1.0)]);
    assert_eq!(a.nnz(), 3);
    assert_eq!(a.get(0, 1), 3.5);
    assert_eq!(a.get(1, 0), -1.0);
    assert_eq!(a.get(0, 0), 0.0);
    assert_eq!(a.transpose().get(2, 1), 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn least_squares_is_exact_on_polynomial_data(
        coeffs in prop::collection::vec(-5.0f64..5.0, 1..=3),
        xs in prop::collection::btree_set(-400i32..400, 5..12),
    ) {
        let degree = coeffs.len() - 1;
        let eval = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let points: Vec<(f64, f64)> = xs.iter().map(|&k| {
            let x = k as f64 / 100.0;
            (x, eval(x))
        }).collect();
        let fit = least_squares_fit(&points, degree).unwrap();
        for (got, want) in fit.coefficients.iter().zip(&coeffs) {
            prop_assert!((got - want).abs() < 1e-8, "{:?} vs {:?}", fit.coefficients, coeffs);
        }
    }

    #[test]
    fn relaxation_maps_each_eigenvalue(
        diag in prop::collection::vec(-2.0f64..2.0, 2..6),
        theta in 0.05f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut m = triangular(&diag, seed);
        relax_in_place(&mut m, theta);
        let mut got: Vec<f64> = m.eigenvalues().unwrap().into_iter().map(|(re, im)| {
            assert!(im.abs() < 1e-12);
            re
        }).collect();
        let mut want: Vec<f64> = diag.iter().map(|&l| (1.0 - theta) + theta * l).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-12, "{:?} vs {:?}", got, want);
        }
        let rho = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!((dense_matrix_spectral_radius(&m).unwrap() - rho).abs() < 1e-12);
    }

    #[test]
    fn matrix_market_round_trip(
        entries in prop::collection::vec((0usize..7, 0usize..5, -1e6f64..1e6), 0..30),
    ) {
        let a = SparseMatrix::from_triplets(7, 5, &entries);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let back = SparseMatrix::<f64>::read_matrix_market(buf.as_slice()).unwrap();
        prop_assert_eq!(back.nrows(), 7);
        prop_assert_eq!(back.ncols(), 5);
        for i in 0..7 {
            for j in 0..5 {
                prop_assert_eq!(a.get(i, j), back.get(i, j));
            }
        }
    }
}
