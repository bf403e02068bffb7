use std::collections::HashSet;
use std::f64::consts::PI;

use proptest::prelude::*;

use twolevel_dd::coupling::ProblemData;
use twolevel_dd::dd::solve_fitted;
use twolevel_dd::fem::{
    assemble_load, assemble_mass, assemble_stiffness, build_dofmap, eval_basis, l2_error, laser_flux, local_edges,
    Coefficient, QuadratureRule,
};
use twolevel_dd::linalg::{SolverConfig, SparseMatrix};
use twolevel_dd::mesh::{build_global_mesh, build_local_mesh, build_uniform_fitted_mesh, GeometryConfig, StructuredMesh};

fn check_csr(a: &SparseMatrix<f64>) {
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        assert!(cols.windows(2).all(|w| w[0] < w[1]), "row {i} columns not strictly increasing");
        assert!(vals.iter().all(|v| v.is_finite()));
    }
}

fn mesh(dim: usize) -> StructuredMesh<f64> {
    build_global_mesh(&GeometryConfig::standard(dim), 1.0 / 160.0).unwrap()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn quadrature_rules_are_exact_on_monomials() {
    for dim in [2, 3] {
        for degree in 0..=6 {
            let rule = QuadratureRule::<f64>::simplex(dim, degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0 / factorial(dim)).abs() < 1e-14);
            // ∫ λ1^a λ2^b (λ3^c) = a! b! c! d! / (a + b + c + d)!
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let c_max = if dim == 3 { degree - a - b } else { 0 };
                    for c in 0..=c_max {
                        let q: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32))
                            .sum();
                        let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + dim);
                        assert!((q - exact).abs() < 1e-13, "dim {dim} degree {degree} ({a},{b},{c}): {q} vs {exact}");
                    }
                }
            }
        }
    }
}

#[test]
fn dof_counts_and_sharing() {
    for dim in [2, 3] {
        let mesh = mesh(dim);
        let mut edges = HashSet::new();
        for cell in mesh.cells() {
            for &(a, b) in local_edges(dim) {
                let (u, v) = (cell[a].min(cell[b]), cell[a].max(cell[b]));
                edges.insert((u, v));
            }
        }
        let p1 = build_dofmap(&mesh, 1).unwrap();
        let p2 = build_dofmap(&mesh, 2).unwrap();
        assert_eq!(p1.n_dofs(), mesh.n_vertices());
        assert_eq!(p2.n_dofs(), mesh.n_vertices() + edges.len());
        // vertex dofs first, numbered like the vertices
        for c in 0..mesh.n_cells() {
            assert_eq!(&p2.cell_dofs(c)[..=dim], mesh.cell(c));
        }
        // a dof sits where its coordinates say it does
        for c in 0..mesh.n_cells() {
            for (k, &(a, b)) in local_edges(dim).iter().enumerate() {
                let dof = p2.cell_dofs(c)[dim + 1 + k];
                let (va, vb) = (mesh.vertices()[mesh.cell(c)[a]], mesh.vertices()[mesh.cell(c)[b]]);
                for ax in 0..dim {
                    assert!((p2.dof_coords()[dof][ax] - 0.5 * (va[ax] + vb[ax])).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn assembly_is_deterministic_and_well_formed() {
    for dim in [2, 3] {
        let mesh = mesh(dim);
        for m in [1, 2] {
            let dofs = build_dofmap(&mesh, m).unwrap();
            let a = assemble_stiffness(&mesh, &dofs, Coefficient::Constant(1.0)).unwrap();
            let b = assemble_stiffness(&mesh, &dofs, Coefficient::Constant(1.0)).unwrap();
            assert_eq!(a, b);
            check_csr(&a);
            assert!(a.is_symmetric(1e-14));
            let mass = assemble_mass(&mesh, &dofs);
            check_csr(&mass);
            let ones = vec![1.0; dofs.n_dofs()];
            let vol: f64 = mass.mul_vec(&ones).iter().sum();
            assert!((vol - mesh.total_volume()).abs() < 1e-14 * mesh.total_volume().max(1.0));
        }
    }
}

#[test]
fn laser_load_matches_trapezoid_oracle() {
    let g = GeometryConfig::<f64>::standard(2);
    for m in [1, 2] {
        for h in [1.0 / 160.0, 1.0 / 640.0] {
            let mesh = build_local_mesh(&g, h).unwrap();
            let dofs = build_dofmap(&mesh, m).unwrap();
            let load = assemble_load(&mesh, &dofs, |_| 0.0, |x| laser_flux(x, &g));
            let total: f64 = load.iter().sum();
            let n = 10_000;
            let dx = g.length / n as f64;
            let q = |x: f64| laser_flux(&[x, g.height, 0.0], &g);
            let trap: f64 = (0..n).map(|i| 0.5 * dx * (q(i as f64 * dx) + q((i + 1) as f64 * dx))).sum();
            assert!((total - trap).abs() <= 1e-8 * trap, "m={m} h={h}: {total} vs {trap}");
        }
    }
}

#[test]
fn manufactured_solution_converges_at_optimal_rate() {
    let g = GeometryConfig::<f64>::standard(2);
    let (l, h) = (g.length, g.height);
    let exact = move |p: &[f64; 3]| (PI * p[0] / l).sin() * (PI * p[1] / h).sin();
    let lap = PI * PI * (1.0 / (l * l) + 1.0 / (h * h));
    let problem = ProblemData::new(move |p| lap * exact(p), move |p| -(PI / h) * (PI * p[0] / l).sin(), 0.0);
    for m in [1, 2] {
        let errs: Vec<f64> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|n| {
                let mesh = build_uniform_fitted_mesh(&g, l / n).unwrap();
                let sol = solve_fitted(mesh, m, Coefficient::Constant(1.0), &problem, &SolverConfig::direct()).unwrap();
                l2_error(&sol.mesh, &sol.dofs, &sol.values, exact, 2 * m + 2)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= m as f64 + 0.9, "m={m}: order {order}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stiffness_scales_with_constant_coefficient(kappa in 1e-3f64..1e3, dim in 2usize..=3, m in 1usize..=2) {
        let mesh = mesh(dim);
        let dofs = build_dofmap(&mesh, m).unwrap();
        let one = assemble_stiffness(&mesh, &dofs, Coefficient::Constant(1.0)).unwrap();
        let k = assemble_stiffness(&mesh, &dofs, Coefficient::Constant(kappa)).unwrap();
        prop_assert_eq!(one.col_idx(), k.col_idx());
        for (a, b) in k.values().iter().zip(one.values()) {
            prop_assert!((a - kappa * b).abs() <= 1e-14 * (kappa * b).abs().max(kappa * one.max_abs() * 1e-3));
        }
        let ones = vec![1.0; dofs.n_dofs()];
        let r = k.mul_vec(&ones);
        prop_assert!(r.iter().all(|v| v.abs() <= 1e-12 * kappa * one.max_abs()));
    }

    #[test]
    fn basis_is_a_partition_of_unity(w in prop::array::uniform4(1e-3f64..1.0), dim in 2usize..=3, m in 1usize..=2) {
        let mut full = w;
        if dim == 2 {
            full[3] = 0.0;
        }
        let s: f64 = full.iter().sum();
        full.iter_mut().for_each(|v| *v /= s);
        let phi = eval_basis(dim, m, &full);
        let n = twolevel_dd::fem::n_local(dim, m);
        prop_assert!((phi[..n].iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
