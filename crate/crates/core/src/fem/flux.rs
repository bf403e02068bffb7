use crate::mesh::GeometryConfig;
use crate::scalar::{Point, Real};

/// Peak value of the top heat flux.
pub const LASER_PEAK: f64 = 4.0e4;
/// Width parameter of the quartic exponential profile.
pub const LASER_WIDTH: f64 = 1.0e-12;

/// Top heat flux `4e4 exp(−(L/2 − x)⁴ / 1e−12)`, with the second horizontal
/// term `(W/2 − y)⁴` added in 3D.
pub fn laser_flux<T: Real>(x: &Point<T>, geom: &GeometryConfig<T>) -> T {
    let half = T::lit(0.5);
    let mut s = (geom.length * half - x[0]).powi(4);
    if geom.dim == 3 {
        s += (geom.width * half - x[1]).powi(4);
    }
    T::lit(LASER_PEAK) * (-s / T::lit(LASER_WIDTH)).exp()
}
