//! Random-walk kernels, push-forwards and measure comparisons.
//!
//! The kernel `m^ε_x` is the normalised measure of the ball `B(x, ε)`. It is
//! represented by an [`EmpiricalMeasure`] of equal-weight samples. Measures
//! are compared by total variation on a fixed box partition, with one extra
//! sink cell collecting mass that falls outside the boxes.
//!
//! A [`RealitySnapshot`] bundles the rescaled distance, the relative
//! dilations and the relative kernels at `(x, ε)`. It implements
//! [`Structure`] itself, so snapshots of snapshots can be compared with
//! single snapshots at the product scale.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dilation::{DefectReport, DilationStructure, Witness};
use crate::error::{Error, Result};
use crate::rng::item_stream;
use crate::scalar::{Dd, Real};
use crate::space::{Point, Space, SpaceKind};

/// Samples drawn per substream by the parallel kernel sampler.
const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure<T = f64> {
    points: Vec<Point<T>>,
    weights: Vec<f64>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn new(points: Vec<Point<T>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} points with {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Point<T>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty sample".into()));
        }
        Ok(Self {
            points,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(p: Point<T>) -> Self {
        Self {
            points: vec![p],
            weights: vec![1.0],
        }
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn to_f64(&self) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure {
            points: self.points.iter().map(Point::to_f64).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Weighted mean of one coordinate.
    pub fn coordinate_mean(&self, axis: usize) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * p.coords()[axis].to_f64())
            .sum()
    }
}

/// `f♯m`: points mapped, weights kept. `f` returns `None` where undefined.
pub fn pushforward<T: Real, U: Real>(
    f: impl Fn(&Point<T>) -> Option<Point<U>> + Sync,
    m: &EmpiricalMeasure<T>,
) -> Result<EmpiricalMeasure<U>> {
    let points = m
        .points
        .par_iter()
        .enumerate()
        .map(|(index, p)| f(p).ok_or(Error::UndefinedMap { index }))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalMeasure {
        points,
        weights: m.weights.clone(),
    })
}

/// `n` equal-weight draws from `m^ε_x`. Chunks of the sample own substreams
/// derived from `seed`, so the result does not depend on the thread count.
pub fn kernel_sample<T: Real>(
    space: &Space,
    x: &Point<T>,
    eps: T,
    n: usize,
    seed: u64,
) -> Result<EmpiricalMeasure<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("kernel sample size must be >= 1".into()));
    }
    let parts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = item_stream(seed, "kernel", c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| space.sample_ball(x, eps, &mut r))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    EmpiricalMeasure::uniform(parts.into_iter().flatten().collect())
}

/// The tangent kernel `m_x`: uniform on the unit ball of `d^x`. For the
/// continuous built-ins `d^x` is the ambient distance; for a grid it is the
/// Euclidean distance of the continuum `Rⁿ` the lattice approximates.
pub fn tangent_kernel_sample(space: &Space, x: &Point, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    match space.kind() {
        SpaceKind::Grid { dim, .. } => kernel_sample(&Space::euclidean(dim)?, x, 1.0, n, seed),
        _ => kernel_sample(space, x, 1.0, n, seed),
    }
}

/// Regular grid of axis-aligned boxes over `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    lower: Vec<f64>,
    upper: Vec<f64>,
    divisions: usize,
}

impl Partition {
    /// `k` divisions per axis with `k = ⌊cells^(1/n)⌋`, so 64 cells give
    /// 64, 8×8 and 4×4×4 boxes in one, two and three dimensions.
    pub fn regular(lower: Vec<f64>, upper: Vec<f64>, cells: usize) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim {
            return Err(Error::InvalidParameter("partition bounds mismatch".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u && u.is_finite() && l.is_finite())) {
            return Err(Error::InvalidParameter("partition box is empty".into()));
        }
        if cells == 0 {
            return Err(Error::InvalidParameter("partition needs at least one cell".into()));
        }
        let mut k = (cells as f64).powf(1.0 / dim as f64).round() as usize;
        while k > 1 && k.pow(dim as u32) > cells {
            k -= 1;
        }
        Ok(Self {
            lower,
            upper,
            divisions: k.max(1),
        })
    }

    /// Partition of the coordinate box around `B(center, radius)`.
    pub fn for_ball(space: &Space, center: &Point, radius: f64, cells: usize) -> Result<Self> {
        let (lower, upper) = space.ball_bounds(center, radius);
        Self::regular(lower, upper, cells)
    }

    pub fn cell_count(&self) -> usize {
        self.divisions.pow(self.lower.len() as u32)
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// Index of the closed box containing `p`; `None` outside the cover.
    pub fn cell_of<T: Real>(&self, p: &Point<T>) -> Option<usize> {
        let k = self.divisions;
        let mut index = 0;
        for (axis, c) in p.coords().iter().enumerate() {
            let (lo, hi) = (self.lower[axis], self.upper[axis]);
            let c = c.to_f64();
            if !(c >= lo && c <= hi) {
                return None;
            }
            let i = (((c - lo) / (hi - lo)) * k as f64).floor() as usize;
            index = index * k + i.min(k - 1);
        }
        Some(index)
    }

    /// Cell masses, with the sink last.
    pub fn histogram<T: Real>(&self, m: &EmpiricalMeasure<T>) -> Vec<f64> {
        let mut h = vec![0.0; self.cell_count() + 1];
        let sink = self.cell_count();
        for (p, w) in m.points.iter().zip(&m.weights) {
            h[self.cell_of(p).unwrap_or(sink)] += w;
        }
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvReport {
    pub tv: f64,
    /// Mass of each measure outside the partition.
    pub sink: (f64, f64),
}

/// `½ Σ |m1(cell) − m2(cell)|` over the cells and the sink.
pub fn tv_on_partition<T: Real, U: Real>(
    m1: &EmpiricalMeasure<T>,
    m2: &EmpiricalMeasure<U>,
    partition: &Partition,
) -> TvReport {
    let a = partition.histogram(m1);
    let b = partition.histogram(m2);
    let tv = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    TvReport {
        tv: tv.min(1.0),
        sink: (a[a.len() - 1], b[b.len() - 1]),
    }
}

/// Three-sigma multinomial band for TV of two `n`-samples on `cells` cells.
pub fn tv_noise_band(cells: usize, n: usize) -> f64 {
    3.0 * (cells as f64 / n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comp1Report {
    pub scale: f64,
    pub tv: TvReport,
    pub noise_band: f64,
    pub cells: usize,
}

/// TV between `δ^x_{1/ε}♯ m^ε_x` and the tangent kernel `m_x`, each with
/// `n` samples, on a partition of the unit ball's bounding box.
pub fn comp1_defect<R: Rng + ?Sized>(
    ds: &DilationStructure,
    x: &Point,
    eps: f64,
    n: usize,
    cells: usize,
    rng: &mut R,
) -> Result<Comp1Report> {
    let space = ds.space();
    let reference_space = match space.kind() {
        SpaceKind::Grid { dim, .. } => Space::euclidean(dim)?,
        _ => space.clone(),
    };
    let partition = Partition::for_ball(&reference_space, x, 1.0, cells)?;
    let kernel = kernel_sample(space, x, eps, n, rng.random())?;
    let back = pushforward(|u| Some(ds.dilate(x, 1.0 / eps, u)), &kernel)?;
    let reference = tangent_kernel_sample(space, x, n, rng.random())?;
    Ok(Comp1Report {
        scale: eps,
        tv: tv_on_partition(&back, &reference, &partition),
        noise_band: tv_noise_band(partition.cell_count(), n),
        cells: partition.cell_count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comp2Report {
    pub scale: f64,
    /// Empirical `m_x(U_ε(x) \ δ^x_{1/ε} B(x, ε))`.
    pub defect: f64,
    /// Three-sigma binomial band around the estimate.
    pub noise_band: f64,
}

/// Mass under the tangent kernel of chart points whose image under `δ^x_ε`
/// leaves `B(x, ε)`, i.e. of the chart minus the pulled-back ball.
pub fn comp2_defect<R: Rng + ?Sized>(
    ds: &DilationStructure,
    x: &Point,
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<Comp2Report> {
    let space = ds.space();
    let reference = tangent_kernel_sample(space, x, n, rng.random())?;
    let chart = ds.chart(eps);
    let reference_space = match space.kind() {
        SpaceKind::Grid { dim, .. } => Space::euclidean(dim)?,
        _ => space.clone(),
    };
    // Classify in parallel, sum in order: a parallel float sum would depend
    // on the thread count.
    let escaped: Vec<bool> = reference
        .points()
        .par_iter()
        .map(|u| {
            reference_space.distance(x, u) <= chart.domain_radius
                && space.distance(x, &ds.dilate(x, eps, u)) > eps
        })
        .collect();
    let outside: f64 = escaped
        .iter()
        .zip(reference.weights())
        .filter(|(out, _)| **out)
        .map(|(_, w)| *w)
        .sum();
    let p = outside.clamp(0.0, 1.0);
    Ok(Comp2Report {
        scale: eps,
        defect: outside,
        noise_band: 3.0 * (p * (1.0 - p) / n as f64).sqrt(),
    })
}

/// Worst-case constant in the lattice bound `comp2 ≤ C·h/ε`: a chart point
/// can only be misclassified in a boundary shell of width `h√n / (2ε)`, whose
/// relative volume is at most `n` times its width.
pub fn grid_comp2_constant(dim: usize) -> f64 {
    (dim as f64).powf(1.5) / 2.0
}

/// A space with a distance, a dilation family and a kernel family.
pub trait Structure<T: Real>: Sync {
    fn space(&self) -> &Space;

    fn distance(&self, u: &Point<T>, v: &Point<T>) -> T;

    /// Dilation of scale `eps` based at `x`.
    fn dilate(&self, x: &Point<T>, eps: T, u: &Point<T>) -> Point<T>;

    /// `n` samples of the kernel at `x` with scale `eps`.
    fn kernel(&self, x: &Point<T>, eps: T, n: usize, seed: u64) -> Result<EmpiricalMeasure<T>>;
}

impl<T: Real> Structure<T> for DilationStructure {
    fn space(&self) -> &Space {
        DilationStructure::space(self)
    }

    fn distance(&self, u: &Point<T>, v: &Point<T>) -> T {
        DilationStructure::space(self).distance(u, v)
    }

    fn dilate(&self, x: &Point<T>, eps: T, u: &Point<T>) -> Point<T> {
        DilationStructure::dilate(self, x, eps, u)
    }

    fn kernel(&self, x: &Point<T>, eps: T, n: usize, seed: u64) -> Result<EmpiricalMeasure<T>> {
        kernel_sample(DilationStructure::space(self), x, eps, n, seed)
    }
}

/// The structure seen at base `x` and scale `ε`:
///
/// * distance `d^x_ε(u, v)`,
/// * dilations `(u, μ) ↦ δ^x_{1/ε} ∘ δ^{δ^x_ε u}_μ ∘ δ^x_ε`,
/// * kernels `(u, ν) ↦ δ^x_{1/ε}♯ m^{εν}_{δ^x_ε u}`, the `ν`-ball of
///   `d^x_ε` around `u`.
#[derive(Clone, Debug)]
pub struct RealitySnapshot<'a, S, T: Real = Dd> {
    inner: &'a S,
    base: Point<T>,
    scale: T,
}

pub fn reality_snapshot<'a, S: Structure<T>, T: Real>(
    inner: &'a S,
    base: Point<T>,
    scale: T,
) -> Result<RealitySnapshot<'a, S, T>> {
    if !(scale > T::zero() && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "snapshot scale must be positive, got {scale:?}"
        )));
    }
    inner.space().check_point(&base)?;
    Ok(RealitySnapshot { inner, base, scale })
}

impl<S: Structure<T>, T: Real> RealitySnapshot<'_, S, T> {
    pub fn base(&self) -> &Point<T> {
        &self.base
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    fn down(&self, u: &Point<T>) -> Point<T> {
        self.inner.dilate(&self.base, self.scale, u)
    }

    fn up(&self, u: &Point<T>) -> Point<T> {
        self.inner.dilate(&self.base, self.scale.recip(), u)
    }
}

impl<S: Structure<T>, T: Real> Structure<T> for RealitySnapshot<'_, S, T> {
    fn space(&self) -> &Space {
        self.inner.space()
    }

    fn distance(&self, u: &Point<T>, v: &Point<T>) -> T {
        self.inner.distance(&self.down(u), &self.down(v)) / self.scale
    }

    fn dilate(&self, u: &Point<T>, mu: T, v: &Point<T>) -> Point<T> {
        self.up(&self.inner.dilate(&self.down(u), mu, &self.down(v)))
    }

    fn kernel(&self, u: &Point<T>, nu: T, n: usize, seed: u64) -> Result<EmpiricalMeasure<T>> {
        let m = self.inner.kernel(&self.down(u), self.scale * nu, n, seed)?;
        pushforward(|p| Some(self.up(p)), &m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DraftsReport {
    pub eps: f64,
    pub mu: f64,
    pub distance: DefectReport,
    /// Largest coordinate difference of the two dilated points.
    pub dilation: DefectReport,
    /// The same pair measured by the space's distance. On the Heisenberg
    /// group a vertical roundoff `ζ` shows up here as `2√ζ`.
    pub dilation_distance: DefectReport,
    pub kernel: TvReport,
    pub kernel_noise_band: f64,
}

/// Compares the snapshot of the snapshot, `reality(x,ε)(x,μ)`, with
/// `reality(x,εμ)` component by component. Both kernels are drawn from the
/// same substream, so for exact structures the kernel TV is close to zero
/// and the noise band is a generous bound.
pub fn multiple_drafts_defect<R: Rng + ?Sized>(
    ds: &DilationStructure,
    x: &Point,
    eps: f64,
    mu: f64,
    sample_count: usize,
    cells: usize,
    rng: &mut R,
) -> Result<DraftsReport> {
    if sample_count == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let base: Point<Dd> = x.cast();
    let (e, m) = (Dd::new(eps), Dd::new(mu));
    let outer = reality_snapshot(ds, base.clone(), e)?;
    let nested = reality_snapshot(&outer, base.clone(), m)?;
    let flat = reality_snapshot(ds, base.clone(), e * m)?;
    let space = ds.space();
    let radius = ds.chart_config().radius;

    let seed: u64 = rng.random();
    let rows: Vec<[(f64, Witness); 3]> = (0..sample_count)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let mut r = item_stream(seed, "drafts", i);
            let u: Point<Dd> = space.sample_ball(x, radius, &mut r)?.cast();
            let v: Point<Dd> = space.sample_ball(x, radius, &mut r)?.cast();
            let nu = Dd::new(r.random_range(0.1..1.0));
            let witness = Witness::new(&[e, m, nu], &[&base, &u, &v]);
            let dd = (nested.distance(&u, &v) - flat.distance(&u, &v)).abs().to_f64();
            let (p, q) = (nested.dilate(&u, nu, &v), flat.dilate(&u, nu, &v));
            let dl = p
                .coords()
                .iter()
                .zip(q.coords())
                .map(|(a, b)| (*a - *b).abs().to_f64())
                .fold(0.0, f64::max);
            let gauge = space.distance(&p, &q).to_f64();
            Ok([(dd, witness.clone()), (dl, witness.clone()), (gauge, witness)])
        })
        .collect::<Result<_>>()?;

    let u: Point<Dd> = space.sample_ball(x, radius / 2.0, rng)?.cast();
    let nu = Dd::new(rng.random_range(0.25..1.0));
    let kernel_seed: u64 = rng.random();
    let n = sample_count.max(1);
    let a = nested.kernel(&u, nu, n, kernel_seed)?;
    let b = flat.kernel(&u, nu, n, kernel_seed)?;
    let reference_space = match space.kind() {
        SpaceKind::Grid { dim, .. } => Space::euclidean(dim)?,
        _ => space.clone(),
    };
    let partition = Partition::for_ball(&reference_space, &u.to_f64(), nu.to_f64(), cells)?;

    Ok(DraftsReport {
        eps,
        mu,
        distance: DefectReport::from_samples(rows.iter().map(|r| r[0].clone())),
        dilation: DefectReport::from_samples(rows.iter().map(|r| r[1].clone())),
        dilation_distance: DefectReport::from_samples(rows.iter().map(|r| r[2].clone())),
        kernel: tv_on_partition(&a, &b, &partition),
        kernel_noise_band: tv_noise_band(partition.cell_count(), n),
    })
}

/// `x_{k+1} ~ m^ε_{x_k}`, returning `steps + 1` points.
pub fn explorer_walk<R: Rng + ?Sized>(
    space: &Space,
    x0: &Point,
    eps: f64,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("walk needs at least one step".into()));
    }
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x0.clone());
    for k in 0..steps {
        let next = space.sample_ball(&path[k], eps, rng)?;
        path.push(next);
    }
    Ok(path)
}

/// Independent walks, one substream each.
pub fn explorer_walks(
    space: &Space,
    x0: &Point,
    eps: f64,
    steps: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Point>>> {
    (0..count)
        .into_par_iter()
        .map(|i| explorer_walk(space, x0, eps, steps, &mut item_stream(seed, "walk", i)))
        .collect()
}

fn squared_displacement(p: &Point, q: &Point) -> f64 {
    p.coords()
        .iter()
        .zip(q.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Time-averaged mean squared displacement at lags `1..=max_lag`, pooled
/// over all trajectories.
pub fn mean_squared_displacement(paths: &[Vec<Point>], max_lag: usize) -> Vec<(usize, f64)> {
    (1..=max_lag)
        .into_par_iter()
        .map(|lag| {
            let (mut total, mut count) = (0.0, 0usize);
            for path in paths {
                for t in 0..path.len().saturating_sub(lag) {
                    total += squared_displacement(&path[t], &path[t + lag]);
                    count += 1;
                }
            }
            (lag, if count == 0 { f64::NAN } else { total / count as f64 })
        })
        .collect()
}

/// Least-squares slope through the origin of MSD against lag.
pub fn msd_slope(msd: &[(usize, f64)]) -> f64 {
    let num: f64 = msd.iter().map(|(k, m)| *k as f64 * m).sum();
    let den: f64 = msd.iter().map(|(k, _)| (*k as f64).powi(2)).sum();
    num / den
}

/// Sup distance between the empirical step-length CDFs of the first and
/// second half of a trajectory.
pub fn step_length_ks(space: &Space, path: &[Point]) -> f64 {
    let mut steps: Vec<f64> = path.windows(2).map(|w| space.distance(&w[0], &w[1])).collect();
    let half = steps.len() / 2;
    let mut second = steps.split_off(half);
    let mut first = steps;
    first.sort_by(f64::total_cmp);
    second.sort_by(f64::total_cmp);
    let (n1, n2) = (first.len() as f64, second.len() as f64);
    let (mut i, mut j, mut sup) = (0, 0, 0.0f64);
    while i < first.len() && j < second.len() {
        let t = first[i].min(second[j]);
        while i < first.len() && first[i] <= t {
            i += 1;
        }
        while j < second.len() && second[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    sup
}

/// CSV with header `step,coord_0,…` and 17 significant digits.
pub fn write_trajectory_csv<W: Write>(mut out: W, path: &[Point]) -> Result<()> {
    let dim = path.first().map_or(0, Point::dim);
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain((0..dim).map(|i| format!("coord_{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (k, p) in path.iter().enumerate() {
        let row: Vec<String> = p.coords().iter().map(|c| format!("{c:.16e}")).collect();
        writeln!(out, "{k},{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_substream;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn ds(kind: &str) -> DilationStructure {
        DilationStructure::new(Space::new(kind.parse().unwrap()).unwrap())
    }

    #[test]
    fn measure_validation() {
        assert!(EmpiricalMeasure::new(vec![p(&[0.0])], vec![0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![p(&[0.0]), p(&[1.0])], vec![1.5, -0.5]).is_err());
        assert!(EmpiricalMeasure::<f64>::uniform(vec![]).is_err());
        let m = EmpiricalMeasure::new(vec![p(&[0.0]), p(&[1.0])], vec![0.25, 0.75]).unwrap();
        assert_eq!(m.total_mass(), 1.0);
    }

    #[test]
    fn kernel_samples_lie_in_ball() {
        let s = Space::heisenberg();
        let x = p(&[0.3, -0.2, 0.1]);
        let m = kernel_sample(&s, &x, 0.4, 5000, 1).unwrap();
        assert_eq!(m.len(), 5000);
        assert!(m.points().iter().all(|q| s.distance(&x, q) <= 0.4));
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_half_interval_fraction() {
        let s = Space::euclidean(1).unwrap();
        let m = kernel_sample(&s, &p(&[0.0]), 1.0, 100_000, 2).unwrap();
        let frac: f64 = m
            .points()
            .iter()
            .zip(m.weights())
            .filter(|(q, _)| q.coords()[0] >= 0.0)
            .map(|(_, w)| w)
            .sum();
        // 3·sqrt(0.25 / 1e5) ≈ 0.0047
        assert!((frac - 0.5).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn heisenberg_kernel_vertical_mean_vanishes() {
        let s = Space::heisenberg();
        let n = 100_000;
        let m = kernel_sample(&s, &Point::origin(3), 1.0, n, 3).unwrap();
        let mean = m.coordinate_mean(2);
        let var = m
            .points()
            .iter()
            .map(|q| (q.coords()[2] - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * (var / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn kernel_sampling_is_thread_independent() {
        let s = Space::heisenberg();
        let x = p(&[0.1, 0.2, 0.3]);
        let a = kernel_sample(&s, &x, 0.5, 3000, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| kernel_sample(&s, &x, 0.5, 3000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn pushforward_examples() {
        let s = Space::euclidean(2).unwrap();
        let x = p(&[0.2, 0.1]);
        let m = kernel_sample(&s, &x, 0.1, 1000, 4).unwrap();
        assert_eq!(pushforward(|q| Some(q.clone()), &m).unwrap(), m);

        let eps = 0.1;
        let back = pushforward(
            |q: &Point| Some(x.lerp(1.0 / eps, q)),
            &m,
        )
        .unwrap();
        assert!(back.points().iter().all(|q| s.distance(&x, q) <= 1.0 + 1e-12));
        assert_eq!(back.total_mass(), m.total_mass());

        let c = pushforward(|_| Some(p(&[5.0, 5.0])), &m).unwrap();
        let part = Partition::regular(vec![4.0, 4.0], vec![6.0, 6.0], 4).unwrap();
        let h = part.histogram(&c);
        assert!(h.iter().filter(|w| **w > 0.0).count() == 1);

        let err = pushforward(|q: &Point| (q.coords()[0] < 0.2).then(|| q.clone()), &m);
        assert!(matches!(err, Err(Error::UndefinedMap { .. })));
    }

    #[test]
    fn partition_layouts() {
        for (dim, k) in [(1, 64), (2, 8), (3, 4)] {
            let part = Partition::regular(vec![-1.0; dim], vec![1.0; dim], 64).unwrap();
            assert_eq!(part.divisions(), k);
            assert_eq!(part.cell_count(), 64);
        }
        let part = Partition::regular(vec![0.0, 0.0], vec![1.0, 1.0], 4).unwrap();
        assert_eq!(part.cell_of(&p(&[0.0, 0.0])), Some(0));
        assert_eq!(part.cell_of(&p(&[1.0, 1.0])), Some(3));
        assert_eq!(part.cell_of(&p(&[0.75, 0.25])), Some(2));
        assert_eq!(part.cell_of(&p(&[1.5, 0.5])), None);
    }

    #[test]
    fn tv_examples() {
        let part = Partition::regular(vec![-1.0], vec![1.0], 64).unwrap();
        let a = EmpiricalMeasure::point_mass(p(&[-0.9]));
        let b = EmpiricalMeasure::point_mass(p(&[0.9]));
        assert_eq!(tv_on_partition(&a, &a, &part).tv, 0.0);
        assert_eq!(tv_on_partition(&a, &b, &part).tv, 1.0);

        let out = EmpiricalMeasure::point_mass(p(&[3.0]));
        let rep = tv_on_partition(&a, &out, &part);
        assert_eq!(rep.tv, 1.0);
        assert_eq!(rep.sink, (0.0, 1.0));
    }

    #[test]
    fn independent_draws_agree_on_64_cells() {
        let s = Space::euclidean(2).unwrap();
        let x = p(&[0.0, 0.0]);
        let part = Partition::for_ball(&s, &x, 1.0, 64).unwrap();
        let a = kernel_sample(&s, &x, 1.0, 10_000, 5).unwrap();
        let b = kernel_sample(&s, &x, 1.0, 10_000, 6).unwrap();
        assert!(tv_on_partition(&a, &b, &part).tv <= 0.05);
    }

    #[test]
    fn comp1_is_noise_for_exact_spaces() {
        for kind in ["euclidean:2", "euclidean:3", "heisenberg"] {
            let d = ds(kind);
            let mut r = derive_substream(7, kind);
            let x = d.space().sample_base_point(&mut r);
            for eps in [1.0, 0.1, 1e-3] {
                let rep = comp1_defect(&d, &x, eps, 10_000, 64, &mut r).unwrap();
                assert!(rep.tv.tv <= 0.05, "{kind} {rep:?}");
                assert_eq!(rep.tv.sink, (0.0, 0.0));
            }
        }
    }

    #[test]
    fn comp2_vanishes_for_exact_spaces() {
        for kind in ["euclidean:2", "heisenberg", "snowflake:0.5:2"] {
            let d = ds(kind);
            let mut r = derive_substream(8, kind);
            let x = d.space().sample_base_point(&mut r);
            for eps in [0.5, 1e-3] {
                let rep = comp2_defect(&d, &x, eps, 10_000, &mut r).unwrap();
                assert!(rep.defect <= 1e-3, "{kind} {rep:?}");
            }
        }
    }

    #[test]
    fn grid_comp2_within_lattice_bound() {
        let d = ds("grid:0.01:2");
        let mut r = derive_substream(9, "grid");
        let x = d.space().sample_base_point(&mut r);
        for eps in [1.0, 0.5, 0.2, 0.1, 0.05, 0.02] {
            let rep = comp2_defect(&d, &x, eps, 10_000, &mut r).unwrap();
            let bound = grid_comp2_constant(2) * 0.01 / eps + rep.noise_band + 3.0 / 10_000f64.sqrt();
            assert!(rep.defect <= bound, "{rep:?} bound {bound}");
        }
    }

    #[test]
    fn unit_scale_snapshot_is_the_structure() {
        let d = ds("heisenberg");
        let x = p(&[0.2, -0.3, 0.1]).cast::<Dd>();
        let snap = reality_snapshot(&d, x.clone(), Dd::new(1.0)).unwrap();
        let u = p(&[0.5, 0.1, -0.2]).cast::<Dd>();
        let v = p(&[-0.1, 0.4, 0.3]).cast::<Dd>();
        assert_eq!(snap.distance(&u, &v), d.space().distance(&u, &v));
        assert_eq!(snap.distance(&u, &u), Dd::new(0.0));
        assert_eq!(
            Structure::dilate(&snap, &u, Dd::new(0.5), &v),
            d.dilate(&u, Dd::new(0.5), &v)
        );
        assert_eq!(
            snap.kernel(&u, Dd::new(0.3), 100, 1).unwrap(),
            Structure::<Dd>::kernel(&d, &u, Dd::new(0.3), 100, 1).unwrap()
        );
    }

    #[test]
    fn euclidean_snapshot_dilation_is_scale_free() {
        let d = ds("euclidean:1");
        let u = Point::<Dd>::from_raw(vec![Dd::new(1.0)]);
        let v = Point::<Dd>::from_raw(vec![Dd::new(3.0)]);
        for eps in [0.5, 1e-3] {
            let snap = reality_snapshot(&d, Point::origin(1), Dd::new(eps)).unwrap();
            let got = Structure::dilate(&snap, &u, Dd::new(0.5), &v);
            assert!((got.coords()[0] - Dd::new(2.0)).abs().to_f64() < 1e-25);
        }
    }

    #[test]
    fn drafts_are_exact_for_continuous_spaces() {
        for kind in ["euclidean:2", "heisenberg", "snowflake:0.5:2"] {
            let d = ds(kind);
            let mut r = derive_substream(10, kind);
            let x = d.space().sample_base_point(&mut r);
            for (eps, mu) in [(0.5, 0.5), (0.01, 0.3), (0.2, 1.0)] {
                let rep = multiple_drafts_defect(&d, &x, eps, mu, 2000, 64, &mut r).unwrap();
                assert!(rep.distance.sup <= 1e-12, "{kind} {rep:?}");
                assert!(rep.dilation.sup <= 1e-12, "{kind} {rep:?}");
                assert!(rep.kernel.tv <= rep.kernel_noise_band);
            }
        }
    }

    #[test]
    fn drafts_with_unit_mu_vanish() {
        let d = ds("euclidean:3");
        let mut r = derive_substream(11, "mu1");
        let x = d.space().sample_base_point(&mut r);
        let rep = multiple_drafts_defect(&d, &x, 0.3, 1.0, 500, 64, &mut r).unwrap();
        assert!(rep.distance.sup <= 1e-14);
        assert!(rep.dilation.sup <= 1e-14);
        assert_eq!(rep.kernel.tv, 0.0);
    }

    #[test]
    fn grid_drafts_degrade_near_lattice_scale() {
        let d = ds("grid:0.05:2");
        let mut r = derive_substream(12, "grid");
        let x = d.space().sample_base_point(&mut r);
        let coarse = multiple_drafts_defect(&d, &x, 0.9, 0.9, 500, 64, &mut r).unwrap();
        let fine = multiple_drafts_defect(&d, &x, 0.25, 0.25, 500, 64, &mut r).unwrap();
        assert!(fine.dilation.sup > coarse.dilation.sup);
    }

    #[test]
    fn walk_steps_stay_in_kernel_support() {
        let s = Space::heisenberg();
        let path = explorer_walk(&s, &Point::origin(3), 0.1, 500, &mut derive_substream(13, "w")).unwrap();
        assert_eq!(path.len(), 501);
        assert!(path.windows(2).all(|w| s.distance(&w[0], &w[1]) <= 0.1));
        let again = explorer_walk(&s, &Point::origin(3), 0.1, 500, &mut derive_substream(13, "w")).unwrap();
        assert_eq!(path, again);
    }

    #[test]
    fn msd_slope_matches_step_variance() {
        let s = Space::euclidean(2).unwrap();
        let eps = 0.1;
        let paths = explorer_walks(&s, &p(&[0.0, 0.0]), eps, 10_000, 32, 14).unwrap();
        let slope = msd_slope(&mean_squared_displacement(&paths, 100));
        // E|U|² = n/(n+2) ε² for the uniform ball in Rⁿ
        let expected = eps * eps / 2.0;
        assert!((slope / expected - 1.0).abs() <= 0.1, "{slope} vs {expected}");
    }

    #[test]
    fn step_lengths_are_stationary() {
        let s = Space::euclidean(2).unwrap();
        let path = explorer_walk(&s, &p(&[0.0, 0.0]), 0.2, 200_000, &mut derive_substream(15, "ks")).unwrap();
        assert!(step_length_ks(&s, &path) <= 0.02);
    }

    #[test]
    fn trajectory_csv_layout() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[p(&[0.0, 1.0]), p(&[0.5, -0.25])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,coord_0,coord_1");
        assert_eq!(lines[2], "1,5.0000000000000000e-1,-2.5000000000000000e-1");
    }
}
