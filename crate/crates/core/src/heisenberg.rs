//! Heisenberg group in exponential coordinates.
//!
//! Group law `(x,y,z)·(x',y',z') = (x+x', y+y', z+z'+(xy'−yx')/2)`, inverse
//! `(−x,−y,−z)`, dilations `(εx, εy, ε²z)` and the Korányi gauge
//! `((x²+y²)² + 16 z²)^{1/4}`. The gauge together with the group law gives a
//! left-invariant metric `d(p,q) = gauge(p⁻¹·q)` homogeneous of degree one
//! under the dilations.
//!
//! These functions assume three coordinates; [`crate::space::Space`] performs
//! the validation.

use crate::scalar::Real;
use crate::space::Point;

/// Weight of the vertical coordinate in the gauge.
pub const GAUGE_Z_WEIGHT: f64 = 16.0;

#[inline]
fn xyz<T: Real>(p: &Point<T>) -> (T, T, T) {
    let c = p.coords();
    debug_assert_eq!(c.len(), 3);
    (c[0], c[1], c[2])
}

pub fn mul<T: Real>(p: &Point<T>, q: &Point<T>) -> Point<T> {
    let (x, y, z) = xyz(p);
    let (a, b, c) = xyz(q);
    let half = T::from_f64(0.5);
    Point::from_raw(vec![x + a, y + b, z + c + (x * b - y * a) * half])
}

pub fn inv<T: Real>(p: &Point<T>) -> Point<T> {
    let (x, y, z) = xyz(p);
    Point::from_raw(vec![-x, -y, -z])
}

/// `p⁻¹·q` without materialising the inverse.
pub fn left_quotient<T: Real>(p: &Point<T>, q: &Point<T>) -> Point<T> {
    mul(&inv(p), q)
}

pub fn dil<T: Real>(eps: T, p: &Point<T>) -> Point<T> {
    let (x, y, z) = xyz(p);
    Point::from_raw(vec![eps * x, eps * y, eps * eps * z])
}

pub fn gauge<T: Real>(p: &Point<T>) -> T {
    let (x, y, z) = xyz(p);
    let h = x * x + y * y;
    (h * h + T::from_f64(GAUGE_Z_WEIGHT) * z * z).sqrt().sqrt()
}

pub fn distance<T: Real>(p: &Point<T>, q: &Point<T>) -> T {
    gauge(&left_quotient(p, q))
}

/// Lebesgue volume of the unit gauge ball, `π² / (2 sqrt(weight))`.
pub fn unit_ball_volume() -> f64 {
    std::f64::consts::PI * std::f64::consts::PI / (2.0 * GAUGE_Z_WEIGHT.sqrt())
}

/// Largest `|z|` on the gauge ball of radius `r` centred at the identity.
pub fn vertical_extent(r: f64) -> f64 {
    r * r / GAUGE_Z_WEIGHT.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dd;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(vec![x, y, z]).unwrap()
    }

    #[test]
    fn group_law_examples() {
        assert_eq!(mul(&p(1.0, 0.0, 0.0), &p(0.0, 1.0, 0.0)), p(1.0, 1.0, 0.5));
        let q = p(0.3, -1.2, 2.5);
        assert_eq!(mul(&q, &p(0.0, 0.0, 0.0)), q);
        assert_eq!(mul(&p(1.0, 0.0, 0.0), &p(-1.0, 0.0, 0.0)), p(0.0, 0.0, 0.0));
        assert_eq!(mul(&q, &inv(&q)), p(0.0, 0.0, 0.0));
    }

    #[test]
    fn gauge_of_vertical_unit_is_two() {
        assert_eq!(distance(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 1.0)), 2.0);
        assert_eq!(gauge(&p(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dil(0.5, &p(1.0, 1.0, 1.0)), p(0.5, 0.5, 0.25));
        let q = p(0.7, -0.1, 0.33);
        assert_eq!(dil(1.0, &q), q);
        assert_eq!(dil(2.0, &dil(0.5, &q)), q);
    }

    #[test]
    fn gauge_is_homogeneous_in_extended_precision() {
        let q = Point::<Dd>::from_raw(vec![Dd::new(0.3), Dd::new(-0.8), Dd::new(0.21)]);
        let eps = Dd::new(0.37);
        let lhs = gauge(&dil(eps, &q));
        let rhs = eps * gauge(&q);
        assert!((lhs - rhs).abs().to_f64() < 1e-30);
    }

    #[test]
    fn unit_ball_volume_matches_closed_form() {
        assert!((unit_ball_volume() - std::f64::consts::PI.powi(2) / 8.0).abs() < 1e-15);
        assert_eq!(vertical_extent(1.0), 0.25);
    }
}
