use super::structured::{build_uniform_fitted_mesh, extract_boundary_facets};
use super::{FacetTag, GeometryConfig, StructuredMesh};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One horizontal row of vertices: its height and number of intervals.
struct Level<T> {
    y: T,
    n: usize,
    first: usize,
}

/// Conforming 2D mesh resolving the strip interface, with spacing `h_minus`
/// inside the strip and `h_plus` in the bulk.
///
/// Between the coarse rows and the strip, `log2(h_plus / h_minus)` transition
/// rows each double the horizontal resolution; every coarse interval under a
/// refined row becomes a trapezoid split into three triangles. Row heights
/// shrink geometrically so the top transition row meets the strip at `h_minus`
/// resolution.
///
/// The returned mesh has no grid (point location must use search) and its
/// nominal size is `h_plus`.
pub fn build_graded_fitted_mesh<T: Real>(
    geom: &GeometryConfig<T>,
    h_plus: T,
    h_minus: T,
) -> Result<StructuredMesh<T>> {
    geom.validate()?;
    if geom.dim != 2 {
        return Err(Error::Unsupported("graded fitted meshes are 2D only; use uniform-fine in 3D".into()));
    }
    let ratio = (h_plus / h_minus).to_f64_lossy();
    let levels_f = ratio.log2();
    let j_levels = levels_f.round();
    if !(ratio >= 1.0) || (levels_f - j_levels).abs() > 1e-9 {
        return Err(Error::InvalidGeometry(format!("h_plus/h_minus = {ratio} is not a power of two")));
    }
    let j_levels = j_levels as usize;
    if j_levels == 0 {
        return build_uniform_fitted_mesh(geom, h_plus);
    }
    let nx_plus = tile(geom.length, h_plus)?;
    let n_strip = tile(geom.strip, h_minus)?;
    let hb = geom.interface_level();

    let n_coarse = ((hb / h_plus).to_f64_lossy() + 1e-9).floor() as usize;
    let n_coarse = n_coarse.saturating_sub(1);
    let rest = hb - T::from_usize_lossy(n_coarse) * h_plus;
    let two = T::lit(2.0);
    let c = rest / (h_plus * (two - two.powi(1 - j_levels as i32)));

    let mut heights: Vec<(T, usize)> = Vec::new();
    let mut y = T::zero();
    heights.push((y, nx_plus));
    for _ in 0..n_coarse {
        y += h_plus;
        heights.push((y, nx_plus));
    }
    for j in 0..j_levels {
        y += c * h_plus / two.powi(j as i32);
        heights.push((y, nx_plus << (j + 1)));
    }
    // Snap onto the interface exactly, then lay out the strip.
    let last = heights.len() - 1;
    heights[last].0 = hb;
    let nx_fine = nx_plus << j_levels;
    for k in 1..=n_strip {
        let yk = if k == n_strip { geom.height } else { hb + T::from_usize_lossy(k) * h_minus };
        heights.push((yk, nx_fine));
    }

    let mut vertices = Vec::new();
    let mut levels = Vec::with_capacity(heights.len());
    for &(yl, n) in &heights {
        let first = vertices.len();
        let dx = geom.length / T::from_usize_lossy(n);
        for i in 0..=n {
            let x = if i == n { geom.length } else { T::from_usize_lossy(i) * dx };
            vertices.push([x, yl, T::zero()]);
        }
        levels.push(Level { y: yl, n, first });
    }

    let mut cells = Vec::new();
    for w in levels.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        debug_assert!(hi.y > lo.y);
        let b = |i: usize| lo.first + i;
        let t = |i: usize| hi.first + i;
        if hi.n == lo.n {
            for i in 0..lo.n {
                cells.extend_from_slice(&[b(i), b(i + 1), t(i + 1)]);
                cells.extend_from_slice(&[b(i), t(i + 1), t(i)]);
            }
        } else {
            debug_assert_eq!(hi.n, 2 * lo.n);
            for i in 0..lo.n {
                cells.extend_from_slice(&[b(i), b(i + 1), t(2 * i + 1)]);
                cells.extend_from_slice(&[b(i), t(2 * i + 1), t(2 * i)]);
                cells.extend_from_slice(&[b(i + 1), t(2 * i + 2), t(2 * i + 1)]);
            }
        }
    }

    let mut mesh = StructuredMesh { dim: 2, vertices, cells, boundary_facets: Vec::new(), h: h_plus, grid: None };
    let top = geom.height;
    let tol = T::lit(1e-10) * geom.height;
    mesh.boundary_facets = extract_boundary_facets(&mesh, |pts| {
        if pts.iter().all(|p| (p[1] - top).abs() <= tol) {
            FacetTag::NeumannTop
        } else {
            FacetTag::DirichletOuter
        }
    });
    Ok(mesh)
}

fn tile<T: Real>(extent: T, h: T) -> Result<usize> {
    let n = extent / h;
    let r = n.round();
    if r < T::one() || (n - r).abs() > T::lit(1e-12) * n.max(T::one()) {
        return Err(Error::NonDivisibleSpacing { spacing: h.to_f64_lossy(), extent: extent.to_f64_lossy() });
    }
    Ok(r.to_f64_lossy() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_mesh_is_conforming_and_fills_box() {
        let g = GeometryConfig::<f64>::standard(2);
        for ratio in [1usize, 2, 4, 8, 16] {
            let hm = 1.0 / (160.0 * ratio as f64);
            let m = build_graded_fitted_mesh(&g, 1.0 / 160.0, hm).unwrap();
            for c in 0..m.n_cells() {
                assert!(m.cell_geometry(c).det > 0.0);
            }
            assert!((m.total_volume() - g.length * g.height).abs() < 1e-12 * g.length * g.height);
            // boundary is exactly the box perimeter: no hanging edges inside
            let perim: f64 = m.boundary_facets().iter().map(|f| m.facet_measure(&f.vertices)).sum();
            assert!((perim - 2.0 * (g.length + g.height)).abs() < 1e-12, "ratio {ratio}: {perim}");
            let top: f64 = m
                .facets_with_tag(FacetTag::NeumannTop)
                .iter()
                .map(|f| m.facet_measure(&f.vertices))
                .sum();
            assert!((top - g.length).abs() < 1e-14);
            // cells never straddle the interface
            for c in 0..m.n_cells() {
                let verts = m.cell(c);
                let above = verts.iter().filter(|&&v| m.vertices()[v][1] > g.interface_level() + 1e-15).count();
                let below = verts.iter().filter(|&&v| m.vertices()[v][1] < g.interface_level() - 1e-15).count();
                assert!(above == 0 || below == 0);
            }
        }
    }

    #[test]
    fn graded_rejects_3d_and_bad_ratio() {
        let g3 = GeometryConfig::<f64>::standard(3);
        assert!(matches!(build_graded_fitted_mesh(&g3, 1.0 / 160.0, 1.0 / 320.0), Err(Error::Unsupported(_))));
        let g = GeometryConfig::<f64>::standard(2);
        assert!(build_graded_fitted_mesh(&g, 1.0 / 160.0, 1.0 / 480.0).is_err());
    }

    #[test]
    fn graded_is_coarser_than_uniform_fine() {
        let g = GeometryConfig::<f64>::standard(2);
        let graded = build_graded_fitted_mesh(&g, 1.0 / 160.0, 1.0 / 1280.0).unwrap();
        let fine = build_uniform_fitted_mesh(&g, 1.0 / 1280.0).unwrap();
        assert!(graded.n_cells() * 3 < fine.n_cells());
    }
}
