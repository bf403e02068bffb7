use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twolevel_dd::mesh::{build_global_mesh, build_local_mesh, build_uniform_fitted_mesh, FacetTag, GeometryConfig, StructuredMesh};
use twolevel_dd::Error;

fn faces_of(mesh: &StructuredMesh<f64>) -> HashMap<Vec<usize>, usize> {
    let d = mesh.dim();
    let mut count = HashMap::new();
    for cell in mesh.cells() {
        for skip in 0..=d {
            let mut f: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            f.sort_unstable();
            *count.entry(f).or_insert(0) += 1;
        }
    }
    count
}

fn check_topology(mesh: &StructuredMesh<f64>) {
    let faces = faces_of(mesh);
    let mut boundary: Vec<Vec<usize>> = faces.iter().filter(|(_, &c)| c == 1).map(|(f, _)| f.clone()).collect();
    boundary.sort();
    let mut tagged: Vec<Vec<usize>> = mesh
        .boundary_facets()
        .iter()
        .map(|b| {
            let mut v = b.vertices.clone();
            v.sort_unstable();
            v
        })
        .collect();
    tagged.sort();
    let before = tagged.len();
    tagged.dedup();
    assert_eq!(before, tagged.len(), "a boundary facet is listed twice");
    assert_eq!(tagged, boundary, "tagged facets differ from the topological boundary");
    for b in mesh.boundary_facets() {
        let mut v = b.vertices.clone();
        v.sort_unstable();
        let mut owner: Vec<usize> = mesh.cell(b.cell).to_vec();
        owner.sort_unstable();
        assert!(v.iter().all(|x| owner.binary_search(x).is_ok()), "facet not a face of its cell");
    }
}

fn check_volumes(mesh: &StructuredMesh<f64>, expected: f64) {
    for c in 0..mesh.n_cells() {
        assert!(mesh.cell_volume(c) > 0.0);
    }
    let total: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_volume(c)).sum();
    assert!((total - expected).abs() <= 1e-12 * expected, "{total} vs {expected}");
}

fn check_locate(mesh: &StructuredMesh<f64>, lo: [f64; 3], hi: [f64; 3], seed: u64, n: usize) {
    let d = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let mut x = [0.0; 3];
        for a in 0..d {
            x[a] = rng.gen_range(lo[a]..hi[a]);
        }
        let loc = mesh.locate_point(&x).unwrap();
        let lam = &loc.barycentric[..=d];
        assert!(lam.iter().all(|&l| l >= -1e-12));
        assert!((lam.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let verts = mesh.cell(loc.cell_index);
        let mut back = [0.0; 3];
        for (k, &v) in verts.iter().enumerate() {
            for (b, c) in back.iter_mut().zip(&mesh.vertices()[v]).take(d) {
                *b += lam[k] * c;
            }
        }
        for (a, (b, xa)) in back.iter().zip(&x).take(d).enumerate() {
            assert!((b - xa).abs() <= 1e-10, "axis {a}: {b} vs {xa}");
        }
    }
}

fn box_volume(g: &GeometryConfig<f64>, height: f64) -> f64 {
    if g.dim == 3 {
        g.length * g.width * height
    } else {
        g.length * height
    }
}

fn top(g: &GeometryConfig<f64>) -> [f64; 3] {
    let mut hi = [0.0; 3];
    hi[0] = g.length;
    hi[g.dim - 1] = g.height;
    if g.dim == 3 {
        hi[1] = g.width;
    }
    hi
}

#[test]
fn standard_meshes_satisfy_invariants() {
    for dim in [2, 3] {
        let g = GeometryConfig::<f64>::standard(dim);
        let global = build_global_mesh(&g, 1.0 / 160.0).unwrap();
        check_volumes(&global, box_volume(&g, g.height));
        check_topology(&global);
        check_locate(&global, [0.0; 3], top(&g), 1, 1000);
        assert!(global.facets_with_tag(FacetTag::InterfaceGamma).is_empty());
        assert!((global.h() - 1.0 / 160.0).abs() < 1e-15);

        let local = build_local_mesh(&g, 1.0 / 640.0).unwrap();
        check_volumes(&local, box_volume(&g, g.strip));
        check_topology(&local);
        let mut lo = [0.0; 3];
        lo[dim - 1] = g.height - g.strip;
        check_locate(&local, lo, top(&g), 2, 1000);
        let gamma: f64 = local.interface_facets().iter().map(|(f, _)| local.facet_measure(&f.vertices)).sum();
        let exact = g.interface_measure();
        assert!((gamma - exact).abs() <= 1e-12 * exact);
        for (_, n) in local.interface_facets() {
            assert!((n[dim - 1] + 1.0).abs() < 1e-14, "interface normal must point out of the strip");
        }
    }
}

#[test]
fn degenerate_strip_is_rejected() {
    let mut g = GeometryConfig::<f64>::standard(2);
    g.strip = g.height;
    assert!(matches!(g.validate(), Err(Error::InvalidGeometry(_))));
    assert!(build_local_mesh(&g, 1.0 / 640.0).is_err());
}

#[test]
fn spacing_must_divide_the_box() {
    let g = GeometryConfig::<f64>::standard(2);
    assert!(matches!(build_global_mesh(&g, 1.0 / 150.0), Err(Error::NonDivisibleSpacing { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fitted_meshes_for_any_divisor(dim in 2usize..=3, k in 1usize..=4, seed in any::<u64>()) {
        let g = GeometryConfig::<f64>::standard(dim);
        // strip = H/4, so h = strip / k divides both
        let h = g.strip / k as f64;
        let mesh = build_uniform_fitted_mesh(&g, h).unwrap();
        check_volumes(&mesh, box_volume(&g, g.height));
        check_topology(&mesh);
        check_locate(&mesh, [0.0; 3], top(&g), seed, 200);
        for b in mesh.boundary_facets() {
            prop_assert!(b.tag != FacetTag::InterfaceGamma);
        }
    }

    #[test]
    fn local_meshes_for_any_divisor(dim in 2usize..=3, k in 1usize..=6) {
        let g = GeometryConfig::<f64>::standard(dim);
        let mesh = build_local_mesh(&g, g.strip / k as f64).unwrap();
        check_volumes(&mesh, box_volume(&g, g.strip));
        check_topology(&mesh);
        let gamma: f64 = mesh.interface_facets().iter().map(|(f, _)| mesh.facet_measure(&f.vertices)).sum();
        prop_assert!((gamma - g.interface_measure()).abs() <= 1e-12 * g.interface_measure());
    }
}
