//! Dilation structures on the built-in spaces and checkers for their laws.
//!
//! A dilation `δ^x_ε` contracts a neighbourhood of the base `x` by the factor
//! `ε`. From it we build
//!
//! * the rescaled distance `d^x_ε(u, v) = d(δ^x_ε u, δ^x_ε v) / ε`,
//! * relative dilations `δ^{x,u}_{ε,μ} = δ^x_{1/ε} ∘ δ^{δ^x_ε u}_μ ∘ δ^x_ε`,
//! * approximate translations `Σ^x_ε(u, v) = δ^x_{1/ε} δ^{δ^x_ε u}_ε v`.
//!
//! Every composition is generic over [`Real`]; the checkers are usually run
//! with [`crate::scalar::Dd`] because the Heisenberg gauge amplifies
//! coordinate roundoff to its square root.
//!
//! Built-in dilations are defined on the whole space, so the chart domain
//! `U_ε(x) = B(x, R)` is only enforced on caller-supplied arguments.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heisenberg;
use crate::rng::item_stream;
use crate::scalar::Real;
use crate::space::{Point, Space, SpaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    /// Radius `R` of the chart domain `U_ε(x) = B(x, R)`.
    pub radius: f64,
    /// Relative slack `τ` on chart membership and on `V_ε(x) = B(x, εR(1+τ))`.
    pub slack: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            slack: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DilationChart {
    pub scale: f64,
    pub domain_radius: f64,
    pub image_radius: f64,
}

/// Inputs that produced a defect, for replay.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Witness {
    pub scales: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl Witness {
    pub fn new<T: Real>(scales: &[T], points: &[&Point<T>]) -> Self {
        Self {
            scales: scales.iter().map(|s| s.to_f64()).collect(),
            points: points
                .iter()
                .map(|p| p.coords().iter().map(|c| c.to_f64()).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    pub sup: f64,
    pub mean: f64,
    pub sample_count: usize,
    pub worst_witness: Witness,
}

impl DefectReport {
    pub fn zero() -> Self {
        Self {
            sup: 0.0,
            mean: 0.0,
            sample_count: 0,
            worst_witness: Witness::default(),
        }
    }

    /// Sup and mean of the samples. NaN counts as an infinite defect; ties
    /// keep the first witness so the result does not depend on scheduling.
    pub fn from_samples(samples: impl IntoIterator<Item = (f64, Witness)>) -> Self {
        let mut report = Self::zero();
        let mut total = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for (d, w) in samples {
            let d = if d.is_nan() { f64::INFINITY } else { d.abs() };
            report.sample_count += 1;
            total += d;
            if d > worst {
                worst = d;
                report.worst_witness = w;
            }
        }
        if report.sample_count > 0 {
            report.sup = worst;
            report.mean = (total / report.sample_count as f64).min(worst);
        }
        report
    }

    pub fn merge(reports: impl IntoIterator<Item = DefectReport>) -> Self {
        let mut out = Self::zero();
        let mut total = 0.0;
        for r in reports {
            total += r.mean * r.sample_count as f64;
            out.sample_count += r.sample_count;
            if r.sample_count > 0 && (out.sample_count == r.sample_count || r.sup > out.sup) {
                out.sup = r.sup;
                out.worst_witness = r.worst_witness;
            }
        }
        if out.sample_count > 0 {
            out.mean = (total / out.sample_count as f64).min(out.sup);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DilationStructure {
    space: Space,
    chart: ChartConfig,
}

impl DilationStructure {
    pub fn new(space: Space) -> Self {
        Self {
            space,
            chart: ChartConfig::default(),
        }
    }

    pub fn with_chart(space: Space, chart: ChartConfig) -> Result<Self> {
        if !(chart.radius > 0.0 && chart.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "chart radius must be positive, got {}",
                chart.radius
            )));
        }
        if !(chart.slack >= 0.0 && chart.slack.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "chart slack must be nonnegative, got {}",
                chart.slack
            )));
        }
        Ok(Self { space, chart })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn chart_config(&self) -> ChartConfig {
        self.chart
    }

    pub fn chart(&self, scale: f64) -> DilationChart {
        DilationChart {
            scale,
            domain_radius: self.chart.radius,
            image_radius: scale * self.chart.radius * (1.0 + self.chart.slack),
        }
    }

    /// `δ^x_ε u`. No domain checks. Scale one is the identity exactly, also
    /// where the group-law evaluation would round.
    pub fn dilate<T: Real>(&self, x: &Point<T>, eps: T, u: &Point<T>) -> Point<T> {
        if eps == T::one() {
            return u.clone();
        }
        match self.space.kind() {
            SpaceKind::Euclidean { .. } => x.lerp(eps, u),
            SpaceKind::Heisenberg => {
                heisenberg::mul(x, &heisenberg::dil(eps, &heisenberg::left_quotient(x, u)))
            }
            SpaceKind::Snowflake { alpha, .. } => x.lerp(eps.root(alpha), u),
            SpaceKind::Grid { .. } => self.space.snap(x.lerp(eps, u)),
        }
    }

    fn check_scale<T: Real>(scale: T) -> Result<()> {
        if scale > T::zero() && scale.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "scale must be positive and finite, got {scale:?}"
            )))
        }
    }

    /// Rejects `u ∉ U_ε(x)`, allowing the configured slack.
    pub fn check_chart<T: Real>(&self, x: &Point<T>, u: &Point<T>) -> Result<()> {
        self.space.check_point(x)?;
        self.space.check_point(u)?;
        let distance = self.space.distance(x, u).to_f64();
        let radius = self.chart.radius;
        if distance <= radius * (1.0 + self.chart.slack) {
            Ok(())
        } else {
            Err(Error::ChartDomain { distance, radius })
        }
    }

    pub fn rescaled_distance<T: Real>(
        &self,
        x: &Point<T>,
        eps: T,
        u: &Point<T>,
        v: &Point<T>,
    ) -> Result<T> {
        Self::check_scale(eps)?;
        self.check_chart(x, u)?;
        self.check_chart(x, v)?;
        Ok(self.rescaled_distance_unchecked(x, eps, u, v))
    }

    pub fn rescaled_distance_unchecked<T: Real>(
        &self,
        x: &Point<T>,
        eps: T,
        u: &Point<T>,
        v: &Point<T>,
    ) -> T {
        self.space
            .distance(&self.dilate(x, eps, u), &self.dilate(x, eps, v))
            / eps
    }

    pub fn relative_dilation<T: Real>(
        &self,
        x: &Point<T>,
        eps: T,
        u: &Point<T>,
        mu: T,
        v: &Point<T>,
    ) -> Result<Point<T>> {
        Self::check_scale(eps)?;
        Self::check_scale(mu)?;
        self.check_chart(x, u)?;
        self.check_chart(x, v)?;
        Ok(self.relative_dilation_unchecked(x, eps, u, mu, v))
    }

    pub fn relative_dilation_unchecked<T: Real>(
        &self,
        x: &Point<T>,
        eps: T,
        u: &Point<T>,
        mu: T,
        v: &Point<T>,
    ) -> Point<T> {
        let centre = self.dilate(x, eps, u);
        let moved = self.dilate(&centre, mu, &self.dilate(x, eps, v));
        self.dilate(x, eps.recip(), &moved)
    }

    pub fn approx_translation<T: Real>(
        &self,
        x: &Point<T>,
        eps: T,
        u: &Point<T>,
        v: &Point<T>,
    ) -> Result<Point<T>> {
        Self::check_scale(eps)?;
        self.check_chart(x, u)?;
        self.check_chart(x, v)?;
        Ok(self.translate(x, eps, u, v))
    }

    /// `Σ^x_ε(u, v)` without domain checks.
    pub fn translate<T: Real>(&self, x: &Point<T>, eps: T, u: &Point<T>, v: &Point<T>) -> Point<T> {
        let b = self.dilate(x, eps, u);
        self.dilate(x, eps.recip(), &self.dilate(&b, eps, v))
    }

    /// Inverse of `v ↦ Σ^x_ε(u, v)`, namely `w ↦ Σ^b_ε(δ^b_{1/ε} x, w)` with
    /// `b = δ^x_ε u`.
    pub fn translate_inverse<T: Real>(
        &self,
        x: &Point<T>,
        eps: T,
        u: &Point<T>,
        w: &Point<T>,
    ) -> Point<T> {
        let b = self.dilate(x, eps, u);
        let a = self.dilate(&b, eps.recip(), x);
        self.translate(&b, eps, &a, w)
    }

    /// Uniform draw from the chart ball `B(x, radius)` in f64, cast to `T`.
    fn draw<T: Real, R: Rng + ?Sized>(&self, x: &Point, radius: f64, rng: &mut R) -> Result<Point<T>> {
        Ok(self.space.sample_ball(x, radius, rng)?.cast())
    }

    /// Semigroup, base-fixing and bijectivity defects per ladder scale.
    ///
    /// For every scale `ε` and sample: a base `x`, a point `u ∈ U_ε(x)` and a
    /// second scale `μ` picked from the ladder. Each sample owns a substream
    /// derived from one draw of `rng`, so results do not depend on threads.
    pub fn check_base_axioms<T: Real, R: Rng + ?Sized>(
        &self,
        ladder: &[f64],
        sample_count: usize,
        rng: &mut R,
    ) -> Result<Vec<BaseAxiomReport>> {
        for &s in ladder {
            Self::check_scale(s)?;
        }
        if ladder.is_empty() || sample_count == 0 {
            return Err(Error::InvalidParameter(
                "need a nonempty ladder and at least one sample".into(),
            ));
        }
        let seed: u64 = rng.random();
        ladder
            .iter()
            .enumerate()
            .map(|(k, &eps)| {
                let rows: Vec<[(f64, Witness); 3]> = (0..sample_count)
                    .into_par_iter()
                    .map(|i| -> Result<_> {
                        let mut r = item_stream(seed, &format!("axioms/{k}"), i);
                        let x = self.space.sample_base_point(&mut r);
                        let u: Point<T> = self.draw(&x, self.chart.radius, &mut r)?;
                        let x: Point<T> = x.cast();
                        let mu = ladder[r.random_range(0..ladder.len())];
                        let (e, m) = (T::from_f64(eps), T::from_f64(mu));
                        let d = |p: &Point<T>, q: &Point<T>| self.space.distance(p, q).to_f64();
                        let lhs = self.dilate(&x, e, &self.dilate(&x, m, &u));
                        let rhs = self.dilate(&x, e * m, &u);
                        let semigroup = (d(&lhs, &rhs), Witness::new(&[e, m], &[&x, &u]));
                        let fixed = (
                            d(&self.dilate(&x, e, &x), &x),
                            Witness::new(&[e], &[&x]),
                        );
                        let back = self.dilate(&x, e.recip(), &self.dilate(&x, e, &u));
                        let bijective = (d(&back, &u), Witness::new(&[e], &[&x, &u]));
                        Ok([semigroup, fixed, bijective])
                    })
                    .collect::<Result<_>>()?;
                let column = |j: usize| DefectReport::from_samples(rows.iter().map(|r| r[j].clone()));
                Ok(BaseAxiomReport {
                    scale: eps,
                    semigroup: column(0),
                    base_fixed: column(1),
                    bijectivity: column(2),
                })
            })
            .collect()
    }

    /// Groupoid laws of the approximate translations at `(x, ε)`, plus the
    /// round trip through the inverse arrow. Triples are drawn from
    /// `B(x, R/4)`, which keeps every intermediate point inside the charts.
    pub fn groupoid_checks<T: Real, R: Rng + ?Sized>(
        &self,
        x: &Point,
        eps: f64,
        triple_count: usize,
        rng: &mut R,
    ) -> Result<GroupoidReport> {
        Self::check_scale(eps)?;
        self.space.check_point(x)?;
        if triple_count == 0 {
            return Err(Error::InvalidParameter("need at least one triple".into()));
        }
        let seed: u64 = rng.random();
        let reach = self.chart.radius / 4.0;
        let rows: Vec<[(f64, Witness); 4]> = (0..triple_count)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let mut r = item_stream(seed, "groupoid", i);
                let u: Point<T> = self.draw(x, reach, &mut r)?;
                let v: Point<T> = self.draw(x, reach, &mut r)?;
                let w: Point<T> = self.draw(x, reach, &mut r)?;
                let x: Point<T> = x.cast();
                let e = T::from_f64(eps);
                let d = |p: &Point<T>, q: &Point<T>| self.space.distance(p, q).to_f64();
                let b = self.dilate(&x, e, &u);

                let lhs = self.rescaled_distance_unchecked(
                    &x,
                    e,
                    &self.translate(&x, e, &u, &v),
                    &self.translate(&x, e, &u, &w),
                );
                let rhs = self.rescaled_distance_unchecked(&b, e, &v, &w);
                let isometry = (
                    (lhs - rhs).abs().to_f64(),
                    Witness::new(&[e], &[&x, &u, &v, &w]),
                );

                let identity = (
                    d(&self.translate(&x, e, &x, &v), &v),
                    Witness::new(&[e], &[&x, &v]),
                );

                let inner = self.translate(&b, e, &v, &w);
                let left = self.translate(&x, e, &u, &inner);
                let right = self.translate(&x, e, &self.translate(&x, e, &u, &v), &w);
                let composition = (d(&left, &right), Witness::new(&[e], &[&x, &u, &v, &w]));

                let there = self.translate(&x, e, &u, &v);
                let inverse = (
                    d(&self.translate_inverse(&x, e, &u, &there), &v),
                    Witness::new(&[e], &[&x, &u, &v]),
                );
                Ok([isometry, identity, composition, inverse])
            })
            .collect::<Result<_>>()?;
        let column = |j: usize| DefectReport::from_samples(rows.iter().map(|r| r[j].clone()));
        Ok(GroupoidReport {
            scale: eps,
            isometry: column(0),
            identity: column(1),
            composition: column(2),
            inverse_roundtrip: column(3),
        })
    }

    /// Sampled check that `δ^x_ε` maps `U_ε(x)` into `V_ε(x)`: reports the
    /// excess `max(0, d(x, δ^x_ε u) − image_radius)`.
    pub fn chart_image_excess<R: Rng + ?Sized>(
        &self,
        x: &Point,
        eps: f64,
        sample_count: usize,
        rng: &mut R,
    ) -> Result<DefectReport> {
        Self::check_scale(eps)?;
        let chart = self.chart(eps);
        let mut samples = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let u = self.space.sample_ball(x, chart.domain_radius, rng)?;
            let image = self.dilate(x, eps, &u);
            let excess = (self.space.distance(x, &image) - chart.image_radius).max(0.0);
            samples.push((excess, Witness::new(&[eps], &[x, &u])));
        }
        Ok(DefectReport::from_samples(samples))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaseAxiomReport {
    pub scale: f64,
    pub semigroup: DefectReport,
    pub base_fixed: DefectReport,
    pub bijectivity: DefectReport,
}

impl BaseAxiomReport {
    pub fn worst(&self) -> f64 {
        self.semigroup
            .sup
            .max(self.base_fixed.sup)
            .max(self.bijectivity.sup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupoidReport {
    pub scale: f64,
    pub isometry: DefectReport,
    pub identity: DefectReport,
    pub composition: DefectReport,
    pub inverse_roundtrip: DefectReport,
}

impl GroupoidReport {
    pub fn worst(&self) -> f64 {
        self.isometry
            .sup
            .max(self.identity.sup)
            .max(self.composition.sup)
            .max(self.inverse_roundtrip.sup)
    }
}

/// Half-diagonal of a lattice cell: the largest displacement of one rounding.
pub fn grid_rounding_radius(spacing: f64, dim: usize) -> f64 {
    spacing * (dim as f64).sqrt() / 2.0
}

/// Bound on the semigroup defect of the rounded grid dilations for
/// `ε, μ ≤ 1`. Each coordinate of the two sides differs by at most one
/// lattice step.
pub fn grid_semigroup_bound(spacing: f64, dim: usize) -> f64 {
    (2.0 * spacing).max(spacing * (dim as f64).sqrt())
}

/// Bound on the bijectivity defect: the inner rounding is magnified by `1/ε`
/// and the outer one adds a cell.
pub fn grid_bijectivity_bound(spacing: f64, dim: usize, eps: f64) -> f64 {
    grid_rounding_radius(spacing, dim) * (1.0 + 1.0 / eps)
}

/// Bound on all groupoid-law defects for lattice inputs, `ρ(8/ε + 5)` with
/// `ρ` the rounding radius. The composition law is the worst case: four
/// translations each off by `ρ(2/ε + 1)` and one extra rounding.
pub fn grid_groupoid_bound(spacing: f64, dim: usize, eps: f64) -> f64 {
    grid_rounding_radius(spacing, dim) * (8.0 / eps + 5.0)
}
