//! Concrete metric-measure spaces and elementary primitives on them.
//!
//! Four kinds are built in:
//!
//! * `euclidean(n)`: `Rⁿ` with the Euclidean distance and Lebesgue measure;
//! * `heisenberg`: `R³` with the Heisenberg group law, the Korányi gauge
//!   distance `gauge(p⁻¹·q)` and Lebesgue (Haar) measure;
//! * `snowflake(α, n)`: `Rⁿ` with `|p − q|^α`, `0 < α < 1`;
//! * `grid(h, n, L)`: the lattice `h·Zⁿ` with the Euclidean distance and
//!   counting measure. Balls are restricted to the window `[−L, L]ⁿ`.
//!
//! Spaces are immutable values. Every sampler takes the random stream
//! explicitly, so the same space can be shared across threads.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heisenberg;
use crate::scalar::Real;

/// Upper bound on rejection-sampling attempts for a single ball sample.
pub const REJECTION_CAP: usize = 1_000_000;

/// Default half-width of the window a grid space lives in.
pub const DEFAULT_GRID_WINDOW: f64 = 4.0;

/// A point given by its ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point<T = f64> {
    coords: Vec<T>,
}

impl<T: Real> Point<T> {
    /// Builds a point, rejecting non-finite coordinates.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { coords })
    }

    pub(crate) fn from_raw(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Point<U> {
        Point {
            coords: self
                .coords
                .iter()
                .map(|&c| U::from_f64(c.to_f64()))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Point<f64> {
        self.cast()
    }

    /// `self + s·(other − self)`, coordinate-wise.
    pub(crate) fn lerp(&self, s: T, other: &Self) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| a + s * (b - a))
                .collect(),
        }
    }

    pub(crate) fn euclidean_distance(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }
}

impl Point<f64> {
    /// Componentwise maximum absolute difference, used for closed-form checks.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceKind {
    Euclidean { dim: usize },
    Heisenberg,
    Snowflake { alpha: f64, dim: usize },
    Grid { spacing: f64, dim: usize, window: f64 },
}

impl SpaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::Euclidean { .. } => "euclidean",
            SpaceKind::Heisenberg => "heisenberg",
            SpaceKind::Snowflake { .. } => "snowflake",
            SpaceKind::Grid { .. } => "grid",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceKind::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            SpaceKind::Heisenberg => write!(f, "heisenberg"),
            SpaceKind::Snowflake { alpha, dim } => write!(f, "snowflake:{alpha}:{dim}"),
            SpaceKind::Grid {
                spacing,
                dim,
                window,
            } => write!(f, "grid:{spacing}:{dim}:{window}"),
        }
    }
}

/// Parses `euclidean:N`, `heisenberg`, `snowflake:ALPHA[:N]` and
/// `grid:H[:N[:WINDOW]]`. Snowflake defaults to `N = 1`, grid to `N = 2`.
impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let args: Vec<&str> = parts.collect();
        let bad = |what: &str| Error::InvalidParameter(format!("{what} in space `{s}`"));
        let num = |i: usize| -> Result<Option<f64>> {
            args.get(i)
                .map(|a| a.parse::<f64>().map_err(|_| bad("malformed number")))
                .transpose()
        };
        let int = |i: usize| -> Result<Option<usize>> {
            args.get(i)
                .map(|a| a.parse::<usize>().map_err(|_| bad("malformed integer")))
                .transpose()
        };
        let kind = match head.as_str() {
            "euclidean" => {
                if args.len() > 1 {
                    return Err(bad("too many arguments"));
                }
                SpaceKind::Euclidean {
                    dim: int(0)?.ok_or_else(|| bad("missing dimension"))?,
                }
            }
            "heisenberg" => {
                if !args.is_empty() {
                    return Err(bad("unexpected arguments"));
                }
                SpaceKind::Heisenberg
            }
            "snowflake" => {
                if args.len() > 2 {
                    return Err(bad("too many arguments"));
                }
                SpaceKind::Snowflake {
                    alpha: num(0)?.ok_or_else(|| bad("missing exponent"))?,
                    dim: int(1)?.unwrap_or(1),
                }
            }
            "grid" => {
                if args.len() > 3 {
                    return Err(bad("too many arguments"));
                }
                SpaceKind::Grid {
                    spacing: num(0)?.ok_or_else(|| bad("missing spacing"))?,
                    dim: int(1)?.unwrap_or(2),
                    window: num(2)?.unwrap_or(DEFAULT_GRID_WINDOW),
                }
            }
            _ => return Err(bad("unknown kind")),
        };
        Ok(kind)
    }
}

/// A measured metric space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Space {
    kind: SpaceKind,
}

impl Space {
    pub fn new(kind: SpaceKind) -> Result<Self> {
        match kind {
            SpaceKind::Euclidean { dim } if dim < 1 => {
                return Err(Error::InvalidParameter(format!(
                    "euclidean dimension must be >= 1, got {dim}"
                )))
            }
            SpaceKind::Snowflake { alpha, dim } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "snowflake exponent must lie in (0, 1), got {alpha}"
                    )));
                }
                if dim < 1 {
                    return Err(Error::InvalidParameter(
                        "snowflake dimension must be >= 1".into(),
                    ));
                }
            }
            SpaceKind::Grid {
                spacing,
                dim,
                window,
            } => {
                if !(spacing > 0.0 && spacing.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "grid spacing must be positive, got {spacing}"
                    )));
                }
                if dim < 1 {
                    return Err(Error::InvalidParameter("grid dimension must be >= 1".into()));
                }
                if !(window >= spacing && window.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "grid window {window} must be at least one spacing"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { kind })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclidean { dim })
    }

    pub fn heisenberg() -> Self {
        Self {
            kind: SpaceKind::Heisenberg,
        }
    }

    pub fn snowflake(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Snowflake { alpha, dim })
    }

    pub fn grid(spacing: f64, dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Grid {
            spacing,
            dim,
            window: DEFAULT_GRID_WINDOW,
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            SpaceKind::Euclidean { dim }
            | SpaceKind::Snowflake { dim, .. }
            | SpaceKind::Grid { dim, .. } => dim,
            SpaceKind::Heisenberg => 3,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, SpaceKind::Grid { .. })
    }

    pub fn check_point<T: Real>(&self, p: &Point<T>) -> Result<()> {
        if p.dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: p.dim(),
            });
        }
        if !p.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Validated point constructor.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        let p = Point::new(coords)?;
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn distance<T: Real>(&self, p: &Point<T>, q: &Point<T>) -> T {
        match self.kind {
            SpaceKind::Euclidean { .. } | SpaceKind::Grid { .. } => p.euclidean_distance(q),
            SpaceKind::Heisenberg => heisenberg::distance(p, q),
            SpaceKind::Snowflake { alpha, .. } => p.euclidean_distance(q).powf(alpha),
        }
    }

    /// Nearest lattice point with ties toward −∞ (grid only; identity elsewhere).
    pub fn snap<T: Real>(&self, p: Point<T>) -> Point<T> {
        match self.kind {
            SpaceKind::Grid { spacing, .. } => {
                let h = T::from_f64(spacing);
                let half = T::from_f64(0.5);
                Point::from_raw(
                    p.coords
                        .iter()
                        .map(|&v| (v / h - half).ceil() * h)
                        .collect(),
                )
            }
            _ => p,
        }
    }

    fn require_heisenberg(&self, op: &'static str) -> Result<()> {
        match self.kind {
            SpaceKind::Heisenberg => Ok(()),
            other => Err(Error::WrongSpaceKind {
                op,
                kind: other.name().to_string(),
            }),
        }
    }

    pub fn hmul<T: Real>(&self, p: &Point<T>, q: &Point<T>) -> Result<Point<T>> {
        self.require_heisenberg("hmul")?;
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(heisenberg::mul(p, q))
    }

    pub fn hinv<T: Real>(&self, p: &Point<T>) -> Result<Point<T>> {
        self.require_heisenberg("hinv")?;
        self.check_point(p)?;
        Ok(heisenberg::inv(p))
    }

    pub fn hdil<T: Real>(&self, eps: T, p: &Point<T>) -> Result<Point<T>> {
        self.require_heisenberg("hdil")?;
        self.check_point(p)?;
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dilation scale must be positive, got {eps:?}"
            )));
        }
        Ok(heisenberg::dil(eps, p))
    }

    /// Measure of the closed ball `B(center, radius)`.
    pub fn ball_measure(&self, center: &Point, radius: f64) -> Result<f64> {
        self.check_point(center)?;
        check_radius(radius)?;
        Ok(match self.kind {
            SpaceKind::Euclidean { dim } => unit_ball_volume(dim) * radius.powi(dim as i32),
            SpaceKind::Heisenberg => heisenberg::unit_ball_volume() * radius.powi(4),
            SpaceKind::Snowflake { alpha, dim } => {
                unit_ball_volume(dim) * radius.powf(dim as f64 / alpha)
            }
            SpaceKind::Grid { .. } => {
                let count = self.lattice_ball_points(center, radius).len();
                if count == 0 {
                    return Err(Error::EmptyBall { radius });
                }
                count as f64
            }
        })
    }

    /// All lattice points of the window inside the closed ball.
    pub fn lattice_ball_points(&self, center: &Point, radius: f64) -> Vec<Point> {
        let SpaceKind::Grid { spacing, .. } = self.kind else {
            return Vec::new();
        };
        let ranges = self.index_ranges(center, radius);
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let q = Point::from_raw(idx.iter().map(|&i| i as f64 * spacing).collect());
            if self.distance(center, &q) <= radius {
                out.push(q);
            }
            let mut axis = 0;
            loop {
                if axis == idx.len() {
                    return out;
                }
                if idx[axis] < ranges[axis].1 {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    fn index_ranges<T: Real>(&self, center: &Point<T>, radius: f64) -> Vec<(i64, i64)> {
        let SpaceKind::Grid {
            spacing, window, ..
        } = self.kind
        else {
            unreachable!("index ranges only exist on grids")
        };
        let w = (window / spacing + 1e-9).floor() as i64;
        center
            .coords()
            .iter()
            .map(|c| {
                let c = c.to_f64();
                let lo = ((c - radius) / spacing).ceil() as i64;
                let hi = ((c + radius) / spacing).floor() as i64;
                (lo.max(-w), hi.min(w))
            })
            .collect()
    }

    /// One draw from the normalised measure restricted to `B(center, radius)`.
    ///
    /// Candidates are drawn uniformly from a coordinate box containing the
    /// ball and accepted when their distance to the centre is at most the
    /// radius, so the returned point always lies in the closed ball.
    pub fn sample_ball<T: Real, R: Rng + ?Sized>(
        &self,
        center: &Point<T>,
        radius: T,
        rng: &mut R,
    ) -> Result<Point<T>> {
        self.check_point(center)?;
        check_radius(radius.to_f64())?;
        let dim = self.ambient_dim();
        let unit = move |rng: &mut R| T::from_f64(2.0 * rng.random::<f64>() - 1.0);
        let grid_ranges = match self.kind {
            SpaceKind::Grid { .. } => {
                let r = self.index_ranges(center, radius.to_f64());
                if r.iter().any(|(lo, hi)| lo > hi) {
                    return Err(Error::EmptyBall {
                        radius: radius.to_f64(),
                    });
                }
                r
            }
            _ => Vec::new(),
        };
        for _ in 0..REJECTION_CAP {
            let candidate = match self.kind {
                SpaceKind::Euclidean { .. } => Point::from_raw(
                    center
                        .coords()
                        .iter()
                        .map(|&c| c + radius * unit(rng))
                        .collect(),
                ),
                SpaceKind::Snowflake { alpha, .. } => {
                    let reach = radius.root(alpha);
                    Point::from_raw(
                        center
                            .coords()
                            .iter()
                            .map(|&c| c + reach * unit(rng))
                            .collect(),
                    )
                }
                SpaceKind::Heisenberg => {
                    let vz = radius * radius / T::from_f64(heisenberg::GAUGE_Z_WEIGHT.sqrt());
                    let offset =
                        Point::from_raw(vec![radius * unit(rng), radius * unit(rng), vz * unit(rng)]);
                    heisenberg::mul(center, &offset)
                }
                SpaceKind::Grid { spacing, .. } => {
                    let h = T::from_f64(spacing);
                    Point::from_raw(
                        grid_ranges
                            .iter()
                            .map(|&(lo, hi)| T::from_f64(rng.random_range(lo..=hi) as f64) * h)
                            .collect(),
                    )
                }
            };
            debug_assert_eq!(candidate.dim(), dim);
            if self.distance(center, &candidate) <= radius {
                return Ok(candidate);
            }
        }
        Err(Error::RejectionCapExceeded {
            attempts: REJECTION_CAP,
            radius: radius.to_f64(),
        })
    }

    /// Coordinate box `(lower, upper)` containing `B(center, radius)`.
    pub fn ball_bounds(&self, center: &Point, radius: f64) -> (Vec<f64>, Vec<f64>) {
        let c = center.coords();
        let reach: Vec<f64> = match self.kind {
            SpaceKind::Euclidean { dim } | SpaceKind::Grid { dim, .. } => vec![radius; dim],
            SpaceKind::Snowflake { alpha, dim } => vec![radius.powf(1.0 / alpha); dim],
            SpaceKind::Heisenberg => {
                let shear = (c[0].abs() + c[1].abs()) * radius / 2.0;
                vec![radius, radius, heisenberg::vertical_extent(radius) + shear]
            }
        };
        let lower = c.iter().zip(&reach).map(|(c, r)| c - r).collect();
        let upper = c.iter().zip(&reach).map(|(c, r)| c + r).collect();
        (lower, upper)
    }

    /// A base point for randomised checks: uniform in `[−1, 1]ⁿ`, snapped to
    /// the lattice for grids.
    pub fn sample_base_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let raw = Point::from_raw(
            (0..self.ambient_dim())
                .map(|_| 2.0 * rng.random::<f64>() - 1.0)
                .collect(),
        );
        self.snap(raw)
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )))
    }
}

/// Lebesgue volume of the Euclidean unit ball in `Rⁿ`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = V_{n-2} · 2π / n
    let (mut even, mut odd) = (1.0, 2.0);
    for n in 2..=dim {
        let v = if n % 2 == 0 { &mut even } else { &mut odd };
        *v *= 2.0 * std::f64::consts::PI / n as f64;
    }
    if dim.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// Planar realisation `A, B, C` of three mutual distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanarTriangle {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
}

impl PlanarTriangle {
    /// `(|AB|, |BC|, |CA|)`.
    pub fn side_lengths(&self) -> (f64, f64, f64) {
        let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        (d(self.a, self.b), d(self.b, self.c), d(self.c, self.a))
    }
}

/// Places `A = (0,0)`, `B = (d_xy, 0)` and `C` in the closed upper half-plane
/// with `|BC| = d_yz`, `|CA| = d_zx`.
pub fn triangle_realization(d_xy: f64, d_yz: f64, d_zx: f64) -> Result<PlanarTriangle> {
    for d in [d_xy, d_yz, d_zx] {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "side lengths must be finite and nonnegative, got {d}"
            )));
        }
    }
    let longest = d_xy.max(d_yz).max(d_zx);
    let slack = 1e-12 * longest.max(1.0);
    if 2.0 * longest > d_xy + d_yz + d_zx + slack {
        return Err(Error::TriangleInequality { d_xy, d_yz, d_zx });
    }
    let (ab, bc, ca) = (d_xy, d_yz, d_zx);
    if ab == 0.0 {
        return Ok(PlanarTriangle {
            a: [0.0, 0.0],
            b: [0.0, 0.0],
            c: [ca, 0.0],
        });
    }
    // Height from the area (Kahan's ordering keeps Heron stable for needles),
    // abscissa from the difference-of-squares form of the law of cosines.
    let mut s = [ab, bc, ca];
    s.sort_by(|x, y| y.total_cmp(x));
    let [p, q, r] = s;
    let radicand = (p + (q + r)) * (r - (p - q)) * (r + (p - q)) * (p + (q - r));
    let area = 0.25 * radicand.max(0.0).sqrt();
    let cy = 2.0 * area / ab;
    let cx = ((ca - bc) * (ca + bc) + ab * ab) / (2.0 * ab);
    Ok(PlanarTriangle {
        a: [0.0, 0.0],
        b: [ab, 0.0],
        c: [cx, cy],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn constructor_examples() {
        let e2 = Space::euclidean(2).unwrap();
        let a = e2.point(vec![0.0, 0.0]).unwrap();
        let b = e2.point(vec![3.0, 4.0]).unwrap();
        assert_eq!(e2.distance(&a, &b), 5.0);

        let h = Space::heisenberg();
        let o = h.point(vec![0.0, 0.0, 0.0]).unwrap();
        let v = h.point(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.distance(&o, &v), 2.0);

        let s = Space::snowflake(0.5, 1).unwrap();
        let z = s.point(vec![0.0]).unwrap();
        let four = s.point(vec![4.0]).unwrap();
        assert_eq!(s.distance(&z, &four), 2.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(Space::euclidean(0), Err(Error::InvalidParameter(_))));
        assert!(matches!(Space::snowflake(1.0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(Space::snowflake(0.0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(Space::grid(0.0, 2), Err(Error::InvalidParameter(_))));
        assert!(matches!(Space::grid(-0.1, 2), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn point_validation() {
        let e2 = Space::euclidean(2).unwrap();
        assert!(matches!(
            e2.point(vec![1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(e2.point(vec![1.0, f64::NAN]), Err(Error::NonFinite)));
    }

    #[test]
    fn space_kind_parses_and_round_trips() {
        for s in ["euclidean:3", "heisenberg", "snowflake:0.5:2", "grid:0.01:2:4"] {
            let kind: SpaceKind = s.parse().unwrap();
            assert_eq!(kind.to_string(), s);
        }
        assert_eq!(
            "grid:0.1".parse::<SpaceKind>().unwrap(),
            SpaceKind::Grid {
                spacing: 0.1,
                dim: 2,
                window: DEFAULT_GRID_WINDOW
            }
        );
        assert_eq!(
            "snowflake:0.5".parse::<SpaceKind>().unwrap(),
            SpaceKind::Snowflake { alpha: 0.5, dim: 1 }
        );
        assert!("torus:2".parse::<SpaceKind>().is_err());
        assert!("euclidean".parse::<SpaceKind>().is_err());
        assert!("heisenberg:3".parse::<SpaceKind>().is_err());
    }

    #[test]
    fn heisenberg_operations_refuse_other_spaces() {
        let e3 = Space::euclidean(3).unwrap();
        let p = e3.point(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(e3.hmul(&p, &p), Err(Error::WrongSpaceKind { .. })));
        assert!(matches!(e3.hinv(&p), Err(Error::WrongSpaceKind { .. })));
        let h = Space::heisenberg();
        assert!(matches!(h.hdil(0.0, &p), Err(Error::InvalidParameter(_))));
        assert!(matches!(h.hdil(-1.0, &p), Err(Error::InvalidParameter(_))));
        assert_eq!(
            h.hmul(&p, &h.point(vec![0.0, 1.0, 0.0]).unwrap()).unwrap(),
            h.point(vec![1.0, 1.0, 0.5]).unwrap()
        );
    }

    #[test]
    fn grid_snap_ties_toward_negative_infinity() {
        let g = Space::grid(1.0, 1).unwrap();
        let snap = |v: f64| g.snap(Point::from_raw(vec![v])).coords()[0];
        assert_eq!(snap(0.5), 0.0);
        assert_eq!(snap(-0.5), -1.0);
        assert_eq!(snap(1.5), 1.0);
        assert_eq!(snap(0.51), 1.0);
        assert_eq!(snap(-0.49), 0.0);
        // Extended precision agrees on exact ties.
        let g = Space::grid(1.0, 1).unwrap();
        assert_eq!(
            g.snap(Point::<Dd>::from_raw(vec![Dd::new(2.5)])).coords()[0],
            Dd::new(2.0)
        );
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_ball_measure_counts_points() {
        let g = Space::grid(1.0, 2).unwrap();
        let o = g.point(vec![0.0, 0.0]).unwrap();
        // (0,0), (±1,0), (0,±1)
        assert_eq!(g.ball_measure(&o, 1.0).unwrap(), 5.0);
        assert_eq!(g.ball_measure(&o, 0.5).unwrap(), 1.0);
        // Restricted to the window [-4, 4]^2 at the corner.
        let corner = g.point(vec![4.0, 4.0]).unwrap();
        assert_eq!(g.ball_measure(&corner, 1.0).unwrap(), 3.0);
        let outside = g.point(vec![9.0, 9.0]).unwrap();
        assert!(matches!(g.ball_measure(&outside, 1.0), Err(Error::EmptyBall { .. })));
    }

    #[test]
    fn samples_stay_in_the_ball() {
        let spaces = [
            Space::euclidean(1).unwrap(),
            Space::euclidean(3).unwrap(),
            Space::heisenberg(),
            Space::snowflake(0.5, 2).unwrap(),
            Space::grid(0.1, 2).unwrap(),
        ];
        let mut r = rng(3);
        for s in &spaces {
            for radius in [1.0, 0.3, 1e-3] {
                let c = s.sample_base_point(&mut r);
                for _ in 0..500 {
                    match s.sample_ball(&c, radius, &mut r) {
                        Ok(q) => assert!(s.distance(&c, &q) <= radius),
                        Err(Error::EmptyBall { .. }) => unreachable!("lattice centre is in its own ball"),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn grid_ball_below_spacing_is_the_centre() {
        let g = Space::grid(0.1, 2).unwrap();
        let c = g.snap(Point::from_raw(vec![0.3, -0.2]));
        let mut r = rng(1);
        for _ in 0..20 {
            assert_eq!(g.sample_ball(&c, 0.05, &mut r).unwrap(), c);
        }
    }

    #[test]
    fn uniform_interval_mean_is_centred() {
        let e1 = Space::euclidean(1).unwrap();
        let c = e1.point(vec![0.0]).unwrap();
        let mut r = rng(11);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| e1.sample_ball(&c, 1.0, &mut r).unwrap().coords()[0])
            .sum::<f64>()
            / n as f64;
        // 3σ/√N = 3 · (1/√3) / √1e5 ≈ 0.0055
        assert!(mean.abs() <= 0.02, "mean {mean}");
    }

    /// Lebesgue fraction of the unit gauge ball with |z| > t by brute-force
    /// midpoint integration of the indicator.
    fn gauge_ball_fraction_above(t: f64) -> f64 {
        let n = 400;
        let (mut inside, mut above) = (0u64, 0u64);
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            for j in 0..n {
                let y = -1.0 + (j as f64 + 0.5) * 2.0 / n as f64;
                for k in 0..n / 2 {
                    let z = -0.25 + (k as f64 + 0.5) * 0.5 / (n / 2) as f64;
                    let g = (x * x + y * y).powi(2) + 16.0 * z * z;
                    if g <= 1.0 {
                        inside += 1;
                        if z.abs() > t {
                            above += 1;
                        }
                    }
                }
            }
        }
        above as f64 / inside as f64
    }

    #[test]
    fn heisenberg_ball_sampler_matches_lebesgue_fractions() {
        let h = Space::heisenberg();
        let o = Point::origin(3);
        let mut r = rng(5);
        let n = 100_000;
        let samples: Vec<Point> = (0..n).map(|_| h.sample_ball(&o, 1.0, &mut r).unwrap()).collect();
        for t in [0.25, 0.125, 0.05] {
            let expected = gauge_ball_fraction_above(t);
            let got = samples.iter().filter(|p| p.coords()[2].abs() > t).count() as f64 / n as f64;
            assert!((got - expected).abs() <= 0.01, "t={t}: {got} vs {expected}");
        }
        assert_eq!(gauge_ball_fraction_above(0.25), 0.0);
    }

    #[test]
    fn heisenberg_ball_is_translated_by_the_centre() {
        let h = Space::heisenberg();
        let c = h.point(vec![0.6, -0.4, 0.2]).unwrap();
        let (lo, hi) = h.ball_bounds(&c, 0.5);
        let mut r = rng(9);
        for _ in 0..2000 {
            let q = h.sample_ball(&c, 0.5, &mut r).unwrap();
            for d in 0..3 {
                assert!(q.coords()[d] >= lo[d] && q.coords()[d] <= hi[d]);
            }
        }
    }

    #[test]
    fn rejection_cap_is_reported() {
        // In 40 dimensions the ball fills ~1e-28 of its bounding box.
        let e = Space::euclidean(40).unwrap();
        let c = Point::origin(40);
        let err = e.sample_ball(&c, 1.0, &mut rng(0)).unwrap_err();
        assert!(matches!(err, Error::RejectionCapExceeded { .. }));
    }

    #[test]
    fn triangle_examples() {
        let t = triangle_realization(3.0, 4.0, 5.0).unwrap();
        assert_eq!((t.a, t.b, t.c), ([0.0, 0.0], [3.0, 0.0], [3.0, 4.0]));

        let t = triangle_realization(1.0, 1.0, 1.0).unwrap();
        assert!((t.c[0] - 0.5).abs() < 1e-15);
        assert!((t.c[1] - 3f64.sqrt() / 2.0).abs() < 1e-15);

        let t = triangle_realization(1.0, 1.0, 2.0).unwrap();
        assert_eq!(t.c, [2.0, 0.0]);
        let t = triangle_realization(2.0, 1.0, 1.0).unwrap();
        assert_eq!(t.c, [1.0, 0.0]);

        let t = triangle_realization(0.0, 2.0, 2.0).unwrap();
        assert_eq!(t.side_lengths(), (0.0, 2.0, 2.0));
    }

    #[test]
    fn triangle_inequality_violation_reports_triple() {
        match triangle_realization(1.0, 1.0, 3.0) {
            Err(Error::TriangleInequality { d_xy, d_yz, d_zx }) => {
                assert_eq!((d_xy, d_yz, d_zx), (1.0, 1.0, 3.0))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(triangle_realization(-1.0, 1.0, 1.0).is_err());
    }
}
