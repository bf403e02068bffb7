use serde::{Deserialize, Serialize};

use super::dense::{qr_least_squares, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Least-squares polynomial with its coefficient of determination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolynomialFit<T> {
    /// `c[k]` multiplies `x^k`.
    pub coefficients: Vec<T>,
    pub r_squared: T,
}

impl<T: Real> PolynomialFit<T> {
    pub fn eval(&self, x: T) -> T {
        self.coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }
}

fn distinct_count<T: Real>(xs: &[T]) -> usize {
    let mut v: Vec<T> = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs())).max(T::min_positive_value());
    let mut count = 0;
    let mut last: Option<T> = None;
    for x in v {
        if last.is_none_or(|l| (x - l).abs() > T::lit(1e-12) * scale) {
            count += 1;
            last = Some(x);
        }
    }
    count
}

/// Polynomial least squares via Householder QR on the Vandermonde matrix.
pub fn least_squares_fit<T: Real>(points: &[(T, T)], degree: usize) -> Result<PolynomialFit<T>> {
    let xs: Vec<T> = points.iter().map(|p| p.0).collect();
    let distinct = distinct_count(&xs);
    if distinct < degree + 1 {
        return Err(Error::RankDeficient(format!(
            "degree {degree} fit needs {} distinct abscissae, got {distinct}",
            degree + 1
        )));
    }
    let mut a = DenseMatrix::zeros(points.len(), degree + 1);
    for (i, &(x, _)) in points.iter().enumerate() {
        let mut p = T::one();
        for k in 0..=degree {
            a[(i, k)] = p;
            p *= x;
        }
    }
    let y: Vec<T> = points.iter().map(|p| p.1).collect();
    let coefficients = qr_least_squares(&a, &y)?;
    let fit = PolynomialFit { coefficients, r_squared: T::zero() };
    let mean = y.iter().copied().sum::<T>() / T::from_usize_lossy(y.len());
    let ss_tot: T = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let ss_res: T = points.iter().map(|&(x, v)| (v - fit.eval(x)) * (v - fit.eval(x))).sum();
    let r_squared = if ss_tot > T::zero() { T::one() - ss_res / ss_tot } else { T::one() };
    Ok(PolynomialFit { r_squared, ..fit })
}

/// Linear and quadratic fits of spectral radius against `κ_−/κ_+`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFit<T> {
    pub a0: T,
    pub a1: T,
    pub b0: T,
    pub b1: T,
    pub b2: T,
    /// `−a1`: the constant in `ρ ≈ C̃ |κ_−/κ_+ − 1|`.
    pub c_tilde: T,
    pub r_squared_linear: T,
}

impl<T: Real> SpectralFit<T> {
    pub fn from_points(points: &[(T, T)]) -> Result<Self> {
        let lin = least_squares_fit(points, 1)?;
        let quad = least_squares_fit(points, 2)?;
        Ok(Self {
            a0: lin.coefficients[0],
            a1: lin.coefficients[1],
            b0: quad.coefficients[0],
            b1: quad.coefficients[1],
            b2: quad.coefficients[2],
            c_tilde: -lin.coefficients[1],
            r_squared_linear: lin.r_squared,
        })
    }

    /// Predicted spectral radius `|a1 x + a0|` at `x = κ_−/κ_+`.
    pub fn predict(&self, kappa_ratio: T) -> T {
        (self.a1 * kappa_ratio + self.a0).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_and_flat_quadratic() {
        let pts: [(f64, f64); 3] = [(1.0, 0.0), (2.0, 1.0), (3.0, 2.0)];
        let f = least_squares_fit(&pts, 1).unwrap();
        assert!((f.coefficients[1] - 1.0).abs() < 1e-14 && (f.coefficients[0] + 1.0).abs() < 1e-14);
        let q = least_squares_fit(&pts, 2).unwrap();
        assert!(q.coefficients[2].abs() < 1e-12);
    }

    #[test]
    fn too_few_distinct_points() {
        let pts: [(f64, f64); 3] = [(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)];
        assert!(matches!(least_squares_fit(&pts, 1), Err(Error::RankDeficient(_))));
        assert!(matches!(least_squares_fit(&[(0.0, 1.0), (1.0, 2.0)], 2), Err(Error::RankDeficient(_))));
    }
}
