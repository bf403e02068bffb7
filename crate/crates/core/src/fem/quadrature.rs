//! Simplex quadrature from collapsed (Duffy) tensor products of
//! Gauss–Legendre rules. All weights are positive.

use crate::scalar::Real;

/// Points are barycentric coordinates on a reference simplex of dimension
/// `dim` (segment, triangle or tetrahedron); weights sum to its measure
/// (1, 1/2, 1/6).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub dim: usize,
    /// Only the first `dim + 1` entries are meaningful.
    pub points: Vec<[T; 4]>,
    pub weights: Vec<T>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

impl<T: Real> QuadratureRule<T> {
    /// Rule on the reference simplex of dimension `dim` exact to `degree`.
    pub fn simplex(dim: usize, degree: usize) -> Self {
        let (points, weights) = match dim {
            1 => {
                let (x, w) = gauss_legendre(degree / 2 + 1);
                let pts = x.iter().map(|&t| bary(&[1.0 - t, t])).collect();
                (pts, w.iter().map(|&v| T::lit(v)).collect())
            }
            2 => {
                let (x, w) = gauss_legendre((degree + 2).div_ceil(2));
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        let (px, py) = (u, v * (1.0 - u));
                        pts.push(bary(&[1.0 - px - py, px, py]));
                        wts.push(T::lit(wu * wv * (1.0 - u)));
                    }
                }
                (pts, wts)
            }
            3 => {
                let (x, w) = gauss_legendre((degree + 3).div_ceil(2));
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        for (&s, &ws) in x.iter().zip(&w) {
                            let px = u;
                            let py = v * (1.0 - u);
                            let pz = s * (1.0 - u) * (1.0 - v);
                            pts.push(bary(&[1.0 - px - py - pz, px, py, pz]));
                            wts.push(T::lit(wu * wv * ws * (1.0 - u) * (1.0 - u) * (1.0 - v)));
                        }
                    }
                }
                (pts, wts)
            }
            _ => panic!("quadrature dimension must be 1, 2 or 3"),
        };
        Self { dim, points, weights, degree }
    }

    /// Composite rule: the reference simplex (segment or triangle) is split
    /// uniformly into `2^levels` pieces per edge and `base` is applied on each.
    pub fn composite(dim: usize, degree: usize, levels: u32) -> Self {
        let base = Self::simplex(dim, degree);
        if levels == 0 {
            return base;
        }
        let n = 1usize << levels;
        let nf = T::from_usize_lossy(n);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                let scale = T::one() / nf;
                for k in 0..n {
                    let a = T::from_usize_lossy(k) / nf;
                    for (p, &w) in base.points.iter().zip(&base.weights) {
                        let t = a + p[1] * scale;
                        points.push([T::one() - t, t, T::zero(), T::zero()]);
                        weights.push(w * scale);
                    }
                }
            }
            2 => {
                // Sub-triangles in reference (x, y) coordinates: upright ones at
                // (i, j), (i+1, j), (i, j+1) and inverted ones at
                // (i+1, j), (i+1, j+1), (i, j+1).
                let scale = T::one() / (nf * nf);
                let mut push = |c: [(T, T); 3]| {
                    for (p, &w) in base.points.iter().zip(&base.weights) {
                        let x = p[0] * c[0].0 + p[1] * c[1].0 + p[2] * c[2].0;
                        let y = p[0] * c[0].1 + p[1] * c[1].1 + p[2] * c[2].1;
                        points.push([T::one() - x - y, x, y, T::zero()]);
                        weights.push(w * scale);
                    }
                };
                let g = |i: usize| T::from_usize_lossy(i) / nf;
                for j in 0..n {
                    for i in 0..n - j {
                        push([(g(i), g(j)), (g(i + 1), g(j)), (g(i), g(j + 1))]);
                        if i + j + 1 < n {
                            push([(g(i + 1), g(j)), (g(i + 1), g(j + 1)), (g(i), g(j + 1))]);
                        }
                    }
                }
            }
            _ => panic!("composite rules are defined for facets (dimension 1 or 2)"),
        }
        Self { dim, points, weights, degree }
    }

    pub fn reference_measure(dim: usize) -> T {
        match dim {
            1 => T::one(),
            2 => T::lit(0.5),
            3 => T::lit(1.0 / 6.0),
            _ => panic!("reference dimension must be 1, 2 or 3"),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn bary<T: Real>(l: &[f64]) -> [T; 4] {
    let mut out = [T::zero(); 4];
    for (o, &v) in out.iter_mut().zip(l) {
        *o = T::lit(v);
    }
    out
}
