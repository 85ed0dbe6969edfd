//! Distortion audits of maps between metric spaces.
//!
//! `bilipschitz_constants` and `rough_constants` estimate the constants of
//!
//! ```text
//! c·d(x, y) − a ≤ D(f x, f y) ≤ C·d(x, y) + A
//! ```
//!
//! over a finite pair set. For maps out of the Heisenberg group,
//! `morphism_defect` measures how far a linear map is from a dilation
//! commuting group morphism into `Rᵐ`, and `vertical_distortion_scan`
//! tracks the best distortion a linear map achieves on ever finer pieces
//! of the unit ball. The scan is a desk-scale witness, not a proof.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::{DefectReport, Witness};
use crate::error::{Error, Result};
use crate::heisenberg;
use crate::rng::item_stream;
use crate::space::Point;
use crate::tangent::{rate_regression, RateFit};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    /// `C / c`, infinite when some pair collapses.
    pub distortion: f64,
    pub min_witness: (Point, Point),
    pub max_witness: (Point, Point),
    /// Pairs with zero source distance, left out of the ratios.
    pub degenerate_pairs: usize,
}

/// Smallest and largest ratio `D(f x, f y) / d(x, y)` over the pairs.
pub fn bilipschitz_constants(
    map: impl Fn(&Point) -> Point,
    pairs: &[(Point, Point)],
    source: impl Fn(&Point, &Point) -> f64,
    target: impl Fn(&Point, &Point) -> f64,
) -> Result<DistortionReport> {
    let mut min: Option<(f64, usize)> = None;
    let mut max: Option<(f64, usize)> = None;
    let mut degenerate = 0;
    for (i, (x, y)) in pairs.iter().enumerate() {
        let d = source(x, y);
        if d == 0.0 {
            degenerate += 1;
            continue;
        }
        let ratio = target(&map(x), &map(y)) / d;
        if min.is_none_or(|(m, _)| ratio < m) {
            min = Some((ratio, i));
        }
        if max.is_none_or(|(m, _)| ratio > m) {
            max = Some((ratio, i));
        }
    }
    let (Some((c, lo)), Some((big_c, hi))) = (min, max) else {
        return Err(Error::DegeneratePairs);
    };
    Ok(DistortionReport {
        c,
        big_c,
        a: 0.0,
        big_a: 0.0,
        distortion: if c > 0.0 { big_c / c } else { f64::INFINITY },
        min_witness: pairs[lo].clone(),
        max_witness: pairs[hi].clone(),
        degenerate_pairs: degenerate,
    })
}

/// Minimal additive constants `(a, A)` for given multiplicative `c ≤ C`.
pub fn rough_constants(
    map: impl Fn(&Point) -> Point,
    pairs: &[(Point, Point)],
    source: impl Fn(&Point, &Point) -> f64,
    target: impl Fn(&Point, &Point) -> f64,
    c: f64,
    big_c: f64,
) -> Result<(f64, f64)> {
    if !(c >= 0.0 && c <= big_c && big_c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= c <= C, got c = {c}, C = {big_c}"
        )));
    }
    let mut a = 0.0f64;
    let mut big_a = 0.0f64;
    for (x, y) in pairs {
        let d = source(x, y);
        let t = target(&map(x), &map(y));
        a = a.max(c * d - t);
        big_a = big_a.max(t - big_c * d);
    }
    Ok((a, big_a))
}

/// A linear map between coordinate spaces, `rows × cols`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearMapCandidate {
    pub matrix: Vec<Vec<f64>>,
}

impl LinearMapCandidate {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let cols = matrix.first().map_or(0, Vec::len);
        if matrix.is_empty() || cols == 0 || matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter(
                "matrix must be a nonempty rectangle".into(),
            ));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { matrix })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LinearMapCandidate = serde_json::from_str(text)?;
        Self::new(raw.matrix)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn apply(&self, p: &Point) -> Point {
        let c = p.coords();
        Point::from_raw(
            self.matrix
                .iter()
                .map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }
}

fn euclidean(p: &Point, q: &Point) -> f64 {
    p.coords()
        .iter()
        .zip(q.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn add(p: &Point, q: &Point) -> Point {
    Point::from_raw(p.coords().iter().zip(q.coords()).map(|(a, b)| a + b).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorphismReport {
    /// `|L(u·v) − (L u + L v)|`
    pub morphism: DefectReport,
    /// `|L(δ_ε u) − ε L u|`
    pub dilation: DefectReport,
}

/// Morphism and dilation-commutation defects of `L: H → Rᵐ` on random
/// points of `[−1, 1]³` and scales in `(0, 1]`.
pub fn morphism_defect<R: Rng + ?Sized>(
    candidate: &LinearMapCandidate,
    sample_count: usize,
    rng: &mut R,
) -> Result<MorphismReport> {
    if candidate.cols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: candidate.cols(),
        });
    }
    let mut morphism = Vec::with_capacity(sample_count);
    let mut dilation = Vec::with_capacity(sample_count);
    let draw = |rng: &mut R| {
        Point::from_raw((0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
    };
    for _ in 0..sample_count {
        let u = draw(rng);
        let v = draw(rng);
        let eps: f64 = 1.0 - rng.random::<f64>();
        let l = |p: &Point| candidate.apply(p);
        let m = euclidean(&l(&heisenberg::mul(&u, &v)), &add(&l(&u), &l(&v)));
        morphism.push((m, Witness::new(&[], &[&u, &v])));
        let lu = l(&u);
        let scaled = Point::from_raw(lu.coords().iter().map(|c| eps * c).collect());
        let d = euclidean(&l(&heisenberg::dil(eps, &u)), &scaled);
        dilation.push((d, Witness::new(&[eps], &[&u])));
    }
    Ok(MorphismReport {
        morphism: DefectReport::from_samples(morphism),
        dilation: DefectReport::from_samples(dilation),
    })
}

/// Gauge-sphere points of radius `s` around the origin.
pub fn sphere_points(s: f64, vertical: bool) -> Vec<Point> {
    let mut pts = Vec::new();
    let h = s / 2f64.sqrt();
    for (x, y) in [(s, 0.0), (0.0, s), (h, h), (h, -h)] {
        pts.push(Point::from_raw(vec![x, y, 0.0]));
    }
    if vertical {
        let top = heisenberg::vertical_extent(s);
        pts.push(Point::from_raw(vec![0.0, 0.0, top]));
        pts.push(Point::from_raw(vec![0.0, 0.0, -top]));
        // (ρ, z) = (s·sqrt(cos φ), s² sin φ / 4) lies on the sphere.
        for phi in [std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_3] {
            let rho = s * phi.cos().sqrt();
            let z = top * phi.sin();
            pts.push(Point::from_raw(vec![rho, 0.0, z]));
            pts.push(Point::from_raw(vec![0.0, rho, -z]));
        }
    }
    pts
}

/// Points paired with the origin at resolution `r`: the spheres of every
/// ladder radius `s` with `r ≤ s ≤ 1`.
pub fn scan_points(ladder: &[f64], r: f64, vertical: bool) -> Vec<Point> {
    ladder
        .iter()
        .filter(|&&s| s >= r && s <= 1.0)
        .flat_map(|&s| sphere_points(s, vertical))
        .collect()
}

/// Distortion of `x ↦ M x` on the pairs `(origin, p)`.
pub fn linear_distortion(matrix: &[f64], rows: usize, points: &[Point]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in points {
        let c = p.coords();
        let norm2: f64 = (0..rows)
            .map(|i| {
                let v: f64 = (0..3).map(|j| matrix[i * 3 + j] * c[j]).sum();
                v * v
            })
            .sum();
        let ratio = norm2.sqrt() / heisenberg::gauge(p);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Target dimension `m` of the candidate maps `H → Rᵐ`.
    pub target_dim: usize,
    pub starts: usize,
    /// Distortion evaluations allowed per scale.
    pub budget: usize,
    /// Pattern search stops once every step is below this.
    pub min_step: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            target_dim: 3,
            starts: 32,
            budget: 40_000,
            min_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Optimum {
    pub distortion: f64,
    pub matrix: Vec<Vec<f64>>,
    pub evaluations: usize,
    /// The budget ran out before every start converged.
    pub budget_exhausted: bool,
}

/// Random multi-start pattern search over `m × 3` matrices.
///
/// The sequence of evaluations is fixed by the stream and does not depend on
/// the budget, which only truncates it. Hence a larger budget with the same
/// stream never reports a worse optimum.
pub fn best_linear_distortion<R: Rng + ?Sized>(
    points: &[Point],
    config: &ScanConfig,
    rng: &mut R,
) -> Result<Optimum> {
    if config.target_dim == 0 || config.starts == 0 || config.budget == 0 {
        return Err(Error::InvalidParameter(
            "scan needs a positive target dimension, start count and budget".into(),
        ));
    }
    if points.is_empty() {
        return Err(Error::DegeneratePairs);
    }
    let m = config.target_dim;
    let dim = 3 * m;
    let starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|_| (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
        .collect();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| -> Option<f64> {
        if evals >= config.budget {
            return None;
        }
        evals += 1;
        Some(linear_distortion(x, m, points))
    };
    let mut best = (f64::INFINITY, starts[0].clone());
    let mut exhausted = false;
    'starts: for start in starts {
        let mut x = start;
        let Some(mut fx) = eval(&x) else {
            exhausted = true;
            break;
        };
        if fx < best.0 {
            best = (fx, x.clone());
        }
        let mut steps = vec![0.5; dim];
        while steps.iter().any(|s| *s >= config.min_step) {
            for i in 0..dim {
                if steps[i] < config.min_step {
                    continue;
                }
                let mut improved = false;
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += sign * steps[i];
                    let Some(fy) = eval(&y) else {
                        exhausted = true;
                        break 'starts;
                    };
                    if fy < fx {
                        x = y;
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
                steps[i] = if improved { steps[i] * 2.0 } else { steps[i] / 2.0 };
                if fx < best.0 {
                    best = (fx, x.clone());
                }
            }
        }
    }
    Ok(Optimum {
        distortion: best.0,
        matrix: best.1.chunks(3).map(<[f64]>::to_vec).collect(),
        evaluations: evals,
        budget_exhausted: exhausted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub scale: f64,
    pub pair_count: usize,
    pub optimum: Optimum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub fit: RateFit,
}

/// Best linear distortion at every scale `r` of the ladder, and its log-log
/// slope against `r`.
///
/// At scale `r` the pairs join the origin to the gauge spheres of all ladder
/// radii in `[r, 1]`, horizontal, vertical and mixed directions. Linear maps
/// scale horizontal directions by `s` and the vertical one by `s²`, so no
/// linear map can keep both the unit and the radius-`r` vertical points in
/// proportion: the distortion is at least `1/r`.
pub fn vertical_distortion_scan<R: Rng + ?Sized>(
    ladder: &[f64],
    config: &ScanConfig,
    rng: &mut R,
) -> Result<ScanReport> {
    if ladder.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
        return Err(Error::InvalidParameter(
            "scan scales must lie in (0, 1]".into(),
        ));
    }
    let seed: u64 = rng.random();
    let rows = ladder
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let points = scan_points(ladder, r, true);
            let optimum = best_linear_distortion(&points, config, &mut item_stream(seed, "scan", k))?;
            Ok(ScanRow {
                scale: r,
                pair_count: points.len(),
                optimum,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = rate_regression(
        &rows
            .iter()
            .map(|row| (row.scale, row.optimum.distortion))
            .collect::<Vec<_>>(),
    )?;
    Ok(ScanReport { rows, fit })
}
