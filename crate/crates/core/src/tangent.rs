//! Convergence of the rescaled structure at `(x, ε)` to its tangent limit.
//!
//! For the continuous built-ins the limit is a conical group: `Rⁿ` with
//! vector addition (also for the snowflake, whose rescaled distance is
//! already scale invariant) and the Heisenberg group translated to `x`.
//! Uniform convergence is measured as a sup over one fixed pair set reused
//! at every scale, so the ladder carries no sampling jitter between rungs.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dilation::{DefectReport, DilationStructure, Witness};
use crate::error::{Error, Result};
use crate::heisenberg;
use crate::scalar::{Dd, Real};
use crate::space::{Point, Space, SpaceKind};

/// Defects below this are exact zeros for rate fitting.
pub const EXACT_THRESHOLD: f64 = 1e-13;

/// Closed-form tangent structure at a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentReference {
    space: Space,
}

pub fn conical_reference(space: &Space) -> Result<TangentReference> {
    match space.kind() {
        SpaceKind::Grid { .. } => Err(Error::NoTangentReference("grid".into())),
        _ => Ok(TangentReference {
            space: space.clone(),
        }),
    }
}

impl TangentReference {
    /// `d^x(u, v)`. All built-in limits are translation invariant and coincide
    /// with the ambient distance.
    pub fn limit_distance<T: Real>(&self, _x: &Point<T>, u: &Point<T>, v: &Point<T>) -> T {
        self.space.distance(u, v)
    }

    /// The conical group law with neutral element `x`.
    pub fn limit_operation<T: Real>(&self, x: &Point<T>, u: &Point<T>, v: &Point<T>) -> Point<T> {
        match self.space.kind() {
            SpaceKind::Heisenberg => heisenberg::mul(
                x,
                &heisenberg::mul(
                    &heisenberg::left_quotient(x, u),
                    &heisenberg::left_quotient(x, v),
                ),
            ),
            _ => Point::from_raw(
                x.coords()
                    .iter()
                    .zip(u.coords())
                    .zip(v.coords())
                    .map(|((&x, &u), &v)| u + v - x)
                    .collect(),
            ),
        }
    }

    /// Inverse of `u` in the group with neutral element `x`.
    pub fn limit_inverse<T: Real>(&self, x: &Point<T>, u: &Point<T>) -> Point<T> {
        match self.space.kind() {
            SpaceKind::Heisenberg => {
                heisenberg::mul(x, &heisenberg::inv(&heisenberg::left_quotient(x, u)))
            }
            _ => x.lerp(T::from_f64(-1.0), u),
        }
    }

    pub fn limit_dilation<T: Real>(&self, x: &Point<T>, mu: T, u: &Point<T>) -> Point<T> {
        match self.space.kind() {
            SpaceKind::Heisenberg => heisenberg::mul(
                x,
                &heisenberg::dil(mu, &heisenberg::left_quotient(x, u)),
            ),
            SpaceKind::Snowflake { alpha, .. } => x.lerp(mu.root(alpha), u),
            _ => x.lerp(mu, u),
        }
    }

    /// Dilation of scale `μ` based at `u` in the tangent group at `x`.
    pub fn limit_relative_dilation<T: Real>(
        &self,
        x: &Point<T>,
        u: &Point<T>,
        mu: T,
        v: &Point<T>,
    ) -> Point<T> {
        let offset = self.limit_operation(x, &self.limit_inverse(x, u), v);
        self.limit_operation(x, u, &self.limit_dilation(x, mu, &offset))
    }
}

/// One rung of a tangent ladder.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentRow {
    pub scale: f64,
    /// `|d^x_ε(u, v) − d^x(u, v)|`
    pub distance: DefectReport,
    /// `d^x(Σ^x_ε(u, v), u ·_x v)`
    pub translation: DefectReport,
    /// `d^x(δ^{x,u}_{ε,μ} v, limit relative dilation)`
    pub dilation: DefectReport,
}

/// The fixed pair set of a ladder. Each pair also carries the scale `μ` used
/// by the dilation column.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pub base: Point,
    pub pairs: Vec<(Point, Point, f64)>,
}

impl PairSet {
    pub fn sample<R: Rng + ?Sized>(
        space: &Space,
        base: &Point,
        radius: f64,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let u = space.sample_ball(base, radius, rng)?;
            let v = space.sample_ball(base, radius, rng)?;
            let mu = rng.random_range(0.1..1.0);
            pairs.push((u, v, mu));
        }
        Ok(Self {
            base: base.clone(),
            pairs,
        })
    }

    /// `sup d(x, u)` over the first members.
    pub fn extent(&self, space: &Space) -> f64 {
        self.pairs
            .iter()
            .map(|(u, _, _)| space.distance(&self.base, u))
            .fold(0.0, f64::max)
    }
}

/// Tangent defects of `ds` at every ladder scale, evaluated in double-double
/// precision on one shared pair set.
pub fn tangent_defect_ladder(
    ds: &DilationStructure,
    reference: &TangentReference,
    pairs: &PairSet,
    ladder: &[f64],
) -> Result<Vec<TangentRow>> {
    if let Some(&bad) = ladder.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "ladder scales must be positive, got {bad}"
        )));
    }
    let x: Point<Dd> = pairs.base.cast();
    let lifted: Vec<(Point<Dd>, Point<Dd>, Dd)> = pairs
        .pairs
        .iter()
        .map(|(u, v, mu)| (u.cast(), v.cast(), Dd::new(*mu)))
        .collect();
    Ok(ladder
        .par_iter()
        .map(|&scale| {
            let eps = Dd::new(scale);
            let mut dist = Vec::with_capacity(lifted.len());
            let mut trans = Vec::with_capacity(lifted.len());
            let mut dil = Vec::with_capacity(lifted.len());
            for (u, v, mu) in &lifted {
                let witness = Witness::new(&[eps, *mu], &[&x, u, v]);
                let d_eps = ds.rescaled_distance_unchecked(&x, eps, u, v);
                let d_0 = reference.limit_distance(&x, u, v);
                dist.push(((d_eps - d_0).abs().to_f64(), witness.clone()));

                let sigma = ds.translate(&x, eps, u, v);
                let target = reference.limit_operation(&x, u, v);
                trans.push((
                    reference.limit_distance(&x, &sigma, &target).to_f64(),
                    witness.clone(),
                ));

                let rel = ds.relative_dilation_unchecked(&x, eps, u, *mu, v);
                let target = reference.limit_relative_dilation(&x, u, *mu, v);
                dil.push((reference.limit_distance(&x, &rel, &target).to_f64(), witness));
            }
            TangentRow {
                scale,
                distance: DefectReport::from_samples(dist),
                translation: DefectReport::from_samples(trans),
                dilation: DefectReport::from_samples(dil),
            }
        })
        .collect())
}

/// Log-log fit of defect against scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateFit {
    /// Every defect is below [`EXACT_THRESHOLD`].
    Exact,
    Power {
        slope: f64,
        intercept: f64,
        r_squared: f64,
        /// `(ln scale, ln defect)` of the points used.
        points: Vec<(f64, f64)>,
    },
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Exact => None,
            RateFit::Power { slope, .. } => Some(*slope),
        }
    }
}

/// Least squares on `(ln scale, ln defect)`, skipping defects below
/// [`EXACT_THRESHOLD`].
pub fn rate_regression(ladder: &[(f64, f64)]) -> Result<RateFit> {
    if ladder.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: ladder.len(),
        });
    }
    for &(s, d) in ladder {
        if !(s > 0.0 && s.is_finite()) || d.is_nan() || d < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ladder point ({s}, {d}) needs a positive scale and nonnegative defect"
            )));
        }
    }
    let points: Vec<(f64, f64)> = ladder
        .iter()
        .filter(|(_, d)| *d >= EXACT_THRESHOLD && d.is_finite())
        .map(|&(s, d)| (s.ln(), d.ln()))
        .collect();
    if points.is_empty() && ladder.iter().all(|(_, d)| *d < EXACT_THRESHOLD) {
        return Ok(RateFit::Exact);
    }
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("ladder scales are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(RateFit::Power {
        slope,
        intercept,
        r_squared,
        points,
    })
}

/// Powers of two `2^-from, …, 2^-to`.
pub fn pow2_ladder(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_substream;

    fn space(kind: &str) -> Space {
        Space::new(kind.parse().unwrap()).unwrap()
    }

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn reference_examples() {
        let e1 = conical_reference(&space("euclidean:1")).unwrap();
        assert_eq!(e1.limit_operation(&p(&[0.0]), &p(&[1.0]), &p(&[2.0])), p(&[3.0]));

        let h = conical_reference(&Space::heisenberg()).unwrap();
        let o = Point::origin(3);
        assert_eq!(
            h.limit_operation(&o, &p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0])),
            p(&[1.0, 1.0, 0.5])
        );

        assert!(matches!(
            conical_reference(&space("grid:0.1:2")),
            Err(Error::NoTangentReference(_))
        ));
    }

    #[test]
    fn reference_neutrality() {
        let mut r = derive_substream(1, "neutral");
        for kind in ["euclidean:3", "heisenberg", "snowflake:0.5:2"] {
            let s = space(kind);
            let t = conical_reference(&s).unwrap();
            for _ in 0..100 {
                let x = s.sample_base_point(&mut r).cast::<Dd>();
                let v = s.sample_base_point(&mut r).cast::<Dd>();
                let d = |a: &Point<Dd>, b: &Point<Dd>| s.distance(a, b).to_f64();
                assert!(d(&t.limit_operation(&x, &x, &v), &v) < 1e-14);
                assert!(d(&t.limit_operation(&x, &v, &x), &v) < 1e-14);
                assert_eq!(t.limit_dilation(&x, Dd::new(1.0), &v), v);
                assert!(d(&t.limit_operation(&x, &v, &t.limit_inverse(&x, &v)), &x) < 1e-14);
            }
        }
    }

    #[test]
    fn euclidean_ladder_is_linear() {
        let s = space("euclidean:1");
        let ds = DilationStructure::new(s.clone());
        let reference = conical_reference(&s).unwrap();
        let mut r = derive_substream(2, "ladder");
        let x = p(&[0.3]);
        let pairs = PairSet::sample(&s, &x, 1.0, 100, &mut r).unwrap();
        let extent = pairs.extent(&s);
        let ladder = pow2_ladder(1, 12);
        let rows = tangent_defect_ladder(&ds, &reference, &pairs, &ladder).unwrap();
        for row in &rows {
            assert_eq!(row.distance.sup, 0.0);
            assert!((row.translation.sup - row.scale * extent).abs() < 1e-12);
            assert!(row.dilation.sup < 1e-13);
        }
        let fit = rate_regression(
            &rows
                .iter()
                .map(|r| (r.scale, r.translation.sup))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((fit.slope().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heisenberg_distance_defect_vanishes() {
        let s = Space::heisenberg();
        let ds = DilationStructure::new(s.clone());
        let reference = conical_reference(&s).unwrap();
        let mut r = derive_substream(3, "h");
        for base in [p(&[0.0, 0.0, 0.0]), p(&[0.4, -0.3, 0.2])] {
            let pairs = PairSet::sample(&s, &base, 1.0, 50, &mut r).unwrap();
            let rows = tangent_defect_ladder(&ds, &reference, &pairs, &pow2_ladder(0, 10)).unwrap();
            for row in rows {
                assert!(row.distance.sup < 1e-13, "{row:?}");
                // Relative dilations do not depend on ε in this group; what is
                // left is roundoff magnified by δ_{1/ε} and the gauge root.
                assert!(row.dilation.sup < 1e-12, "{row:?}");
            }
        }
    }

    #[test]
    fn heisenberg_translation_defect_decreases() {
        let s = Space::heisenberg();
        let ds = DilationStructure::new(s.clone());
        let reference = conical_reference(&s).unwrap();
        let pairs =
            PairSet::sample(&s, &p(&[0.5, 0.2, -0.1]), 1.0, 100, &mut derive_substream(4, "h"))
                .unwrap();
        let rows = tangent_defect_ladder(&ds, &reference, &pairs, &pow2_ladder(1, 10)).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].translation.sup < w[0].translation.sup);
        }
    }

    #[test]
    fn regression_examples() {
        let e = 0.5;
        let fit = rate_regression(&[(e, e), (e / 2.0, e / 2.0), (e / 4.0, e / 4.0)]).unwrap();
        match fit {
            RateFit::Power {
                slope, r_squared, ..
            } => {
                assert!((slope - 1.0).abs() < 1e-12);
                assert!((r_squared - 1.0).abs() < 1e-12);
            }
            RateFit::Exact => panic!(),
        }
        assert_eq!(
            rate_regression(&[(1.0, 0.0), (0.5, 0.0), (0.25, 1e-14)]).unwrap(),
            RateFit::Exact
        );
        assert!(matches!(
            rate_regression(&[(1.0, 1.0), (0.5, 0.5)]),
            Err(Error::InsufficientPoints { .. })
        ));
        // Two nonzero points plus zeros cannot support a fit.
        assert!(matches!(
            rate_regression(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.0)]),
            Err(Error::InsufficientPoints { needed: 3, got: 2 })
        ));
    }
}
