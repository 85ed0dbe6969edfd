//! One runner per experiment. Each draws from its own substream of the
//! configured seed, so experiments never share random numbers.

use rand::Rng;

use crate::dilation::{
    grid_bijectivity_bound, grid_groupoid_bound, grid_semigroup_bound, DefectReport,
    DilationStructure,
};
use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::output::{Cell, Check, Outcome, Table};
use crate::rng::{derive_substream, Stream};
use crate::roughmap::{morphism_defect, vertical_distortion_scan, LinearMapCandidate};
use crate::scalar::Dd;
use crate::space::{Point, Space, SpaceKind};
use crate::tangent::{conical_reference, rate_regression, tangent_defect_ladder, PairSet, RateFit};
use crate::walks::{
    comp1_defect, comp2_defect, explorer_walks, grid_comp2_constant, mean_squared_displacement,
    msd_slope, multiple_drafts_defect, step_length_ks, write_trajectory_csv,
};

/// Tolerance for laws that hold exactly in exact arithmetic.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Tolerance for the multiple-drafts comparison of distances and dilations.
pub const DRAFTS_TOLERANCE: f64 = 1e-12;
/// Relative band on the explorer-walk MSD slope.
pub const MSD_BAND: f64 = 0.10;
/// Allowed growth between consecutive rungs of a decreasing defect ladder.
pub const MONOTONE_FACTOR: f64 = 1.05;

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn setup(config: &ExperimentConfig) -> Result<(DilationStructure, Stream)> {
    let space = Space::new(config.space).map_err(config_error)?;
    let ds = DilationStructure::with_chart(space, config.chart).map_err(config_error)?;
    Ok((ds, derive_substream(config.seed, config.experiment.name())))
}

/// The configured base point, or one drawn from `[-1, 1]ⁿ` (snapped onto the
/// lattice for grids).
fn base_point(config: &ExperimentConfig, space: &Space, rng: &mut Stream) -> Result<Point> {
    match &config.base {
        Some(coords) => {
            let p = space.point(coords.clone()).map_err(config_error)?;
            Ok(space.snap(p))
        }
        None => Ok(space.sample_base_point(rng)),
    }
}

fn grid_params(space: &Space) -> Option<(f64, usize)> {
    match space.kind() {
        SpaceKind::Grid { spacing, dim, .. } => Some((spacing, dim)),
        _ => None,
    }
}

fn coords_text(p: &Point) -> String {
    let parts: Vec<String> = p.coords().iter().map(|c| format!("{c:.16e}")).collect();
    parts.join(" ")
}

/// The row of `rows` where `defect − tolerance` is largest, as a check.
fn worst_check<T>(
    name: &str,
    rows: &[T],
    scale: impl Fn(&T) -> f64,
    report: impl Fn(&T) -> &DefectReport,
    tolerance: impl Fn(&T) -> f64,
) -> Option<Check> {
    let margin = |r: &T| {
        let m = report(r).sup - tolerance(r);
        if m.is_nan() { f64::INFINITY } else { m }
    };
    let worst = rows.iter().max_by(|a, b| margin(a).total_cmp(&margin(b)))?;
    let d = report(worst);
    let check = Check::at_most(
        format!("{name} at scale {:e}", scale(worst)),
        d.sup,
        tolerance(worst),
    );
    Some(check.with_witness(&d.worst_witness))
}

pub fn axioms(config: &ExperimentConfig) -> Result<Outcome> {
    let (ds, mut rng) = setup(config)?;
    let reports = ds.check_base_axioms::<Dd, _>(&config.eps_ladder, config.samples, &mut rng)?;
    let grid = grid_params(ds.space());
    let semigroup_tol = |_: f64| grid.map_or(EXACT_TOLERANCE, |(h, n)| grid_semigroup_bound(h, n));
    let fixed_tol = |_: f64| EXACT_TOLERANCE;
    let bijective_tol = |eps: f64| grid.map_or(EXACT_TOLERANCE, |(h, n)| grid_bijectivity_bound(h, n, eps));

    let mut out = Outcome {
        table: Table::new(&[
            "scale",
            "semigroup_sup",
            "semigroup_mean",
            "semigroup_tolerance",
            "base_fixed_sup",
            "base_fixed_tolerance",
            "bijectivity_sup",
            "bijectivity_mean",
            "bijectivity_tolerance",
        ]),
        ..Outcome::default()
    };
    for r in &reports {
        out.table.push(vec![
            r.scale.into(),
            r.semigroup.sup.into(),
            r.semigroup.mean.into(),
            semigroup_tol(r.scale).into(),
            r.base_fixed.sup.into(),
            fixed_tol(r.scale).into(),
            r.bijectivity.sup.into(),
            r.bijectivity.mean.into(),
            bijective_tol(r.scale).into(),
        ]);
    }
    let scale = |r: &crate::dilation::BaseAxiomReport| r.scale;
    out.checks.extend(worst_check("semigroup", &reports, scale, |r| &r.semigroup, |r| semigroup_tol(r.scale)));
    out.checks.extend(worst_check("base fixed", &reports, scale, |r| &r.base_fixed, |r| fixed_tol(r.scale)));
    out.checks.extend(worst_check("bijectivity", &reports, scale, |r| &r.bijectivity, |r| bijective_tol(r.scale)));
    out.note("samples_per_scale", config.samples);
    Ok(out)
}

pub fn groupoid(config: &ExperimentConfig) -> Result<Outcome> {
    let (ds, mut rng) = setup(config)?;
    let x = base_point(config, ds.space(), &mut rng)?;
    let grid = grid_params(ds.space());
    let tol = |eps: f64| grid.map_or(EXACT_TOLERANCE, |(h, n)| grid_groupoid_bound(h, n, eps));
    let reports = config
        .eps_ladder
        .iter()
        .map(|&eps| ds.groupoid_checks::<Dd, _>(&x, eps, config.samples, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outcome {
        table: Table::new(&[
            "scale",
            "isometry_sup",
            "identity_sup",
            "composition_sup",
            "inverse_sup",
            "tolerance",
            "fitted_c",
        ]),
        ..Outcome::default()
    };
    let mut fitted = 0.0f64;
    for r in &reports {
        // For lattices: the constant C in `worst ≤ C·h/ε` this rung would need.
        let c = grid.map_or(f64::NAN, |(h, _)| r.worst() * r.scale / h);
        fitted = fitted.max(c);
        out.table.push(vec![
            r.scale.into(),
            r.isometry.sup.into(),
            r.identity.sup.into(),
            r.composition.sup.into(),
            r.inverse_roundtrip.sup.into(),
            tol(r.scale).into(),
            c.into(),
        ]);
    }
    let scale = |r: &crate::dilation::GroupoidReport| r.scale;
    let t = |r: &crate::dilation::GroupoidReport| tol(r.scale);
    out.checks.extend(worst_check("groupoid isometry", &reports, scale, |r| &r.isometry, t));
    out.checks.extend(worst_check("groupoid identity", &reports, scale, |r| &r.identity, t));
    out.checks.extend(worst_check("groupoid composition", &reports, scale, |r| &r.composition, t));
    out.checks.extend(worst_check("groupoid inverse", &reports, scale, |r| &r.inverse_roundtrip, t));
    out.note("base", coords_text(&x));
    if grid.is_some() {
        out.note_float("fitted_c", fitted);
    }
    Ok(out)
}

pub fn tangent(config: &ExperimentConfig) -> Result<Outcome> {
    let (ds, mut rng) = setup(config)?;
    let reference = conical_reference(ds.space()).map_err(config_error)?;
    let x = base_point(config, ds.space(), &mut rng)?;
    let pairs = PairSet::sample(ds.space(), &x, config.chart.radius, config.pairs, &mut rng)?;
    let extent = pairs.extent(ds.space());
    let rows = tangent_defect_ladder(&ds, &reference, &pairs, &config.eps_ladder)?;

    let mut out = Outcome {
        table: Table::new(&[
            "scale",
            "distance_sup",
            "translation_sup",
            "translation_mean",
            "dilation_sup",
            "pair_extent",
        ]),
        ..Outcome::default()
    };
    for r in &rows {
        out.table.push(vec![
            r.scale.into(),
            r.distance.sup.into(),
            r.translation.sup.into(),
            r.translation.mean.into(),
            r.dilation.sup.into(),
            extent.into(),
        ]);
    }
    out.note("base", coords_text(&x));
    out.note_float("pair_extent", extent);

    let ladder = |f: fn(&crate::tangent::TangentRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.scale, f(r))).collect()
    };
    let translation = ladder(|r| r.translation.sup);
    if rows.len() >= 3 {
        let fit = rate_regression(&translation)?;
        out.note("translation_fit", serde_json::to_value(&fit)?);
        // These columns are often exact up to a few roundoff rungs, which
        // leaves too few points for a fit; report null then.
        let distance_fit = rate_regression(&ladder(|r| r.distance.sup)).ok();
        out.note("distance_fit", serde_json::to_value(&distance_fit)?);
        let dilation_fit = rate_regression(&ladder(|r| r.dilation.sup)).ok();
        out.note("dilation_fit", serde_json::to_value(&dilation_fit)?);
        if let RateFit::Power { slope, .. } = fit {
            match config.space {
                SpaceKind::Heisenberg => {
                    out.checks.push(Check::at_least("translation slope", slope, 0.45));
                }
                SpaceKind::Euclidean { .. } | SpaceKind::Snowflake { .. } => {
                    out.checks.push(Check::at_least("translation slope", slope, 0.98));
                    out.checks.push(Check::at_most("translation slope", slope, 1.02));
                }
                SpaceKind::Grid { .. } => {}
            }
        }
    }
    let growth = translation
        .windows(2)
        .filter(|w| w[0].1 > 0.0)
        .map(|w| w[1].1 / w[0].1)
        .fold(0.0f64, f64::max);
    out.checks.push(Check::at_most("translation ladder growth", growth, MONOTONE_FACTOR));
    if let SpaceKind::Euclidean { .. } = config.space {
        // Σ^x_ε(u, v) − (u + v − x) = −ε(u − x), so the sup is ε·extent.
        let gap = rows
            .iter()
            .map(|r| (r.translation.sup - r.scale * extent).abs())
            .fold(0.0f64, f64::max);
        out.checks.push(Check::at_most("translation closed form", gap, 1e-12));
    }
    Ok(out)
}

pub fn walks(config: &ExperimentConfig) -> Result<Outcome> {
    let (ds, mut rng) = setup(config)?;
    let space = ds.space();
    let x = base_point(config, space, &mut rng)?;
    let walk_seed: u64 = rng.random();
    let max_lag = 100.min(config.steps);
    // Uniform steps on the unit Euclidean n-ball have E|ξ|² = n/(n+2).
    let expected_rate = match config.space {
        SpaceKind::Euclidean { dim } => Some(dim as f64 / (dim as f64 + 2.0)),
        _ => None,
    };

    let mut out = Outcome {
        table: Table::new(&["scale", "lag", "msd", "expected"]),
        ..Outcome::default()
    };
    let mut summaries = Vec::new();
    for (k, &eps) in config.eps_ladder.iter().enumerate() {
        let paths = explorer_walks(space, &x, eps, config.steps, config.trajectories, walk_seed ^ k as u64)?;
        let msd = mean_squared_displacement(&paths, max_lag);
        let expected = expected_rate.map_or(f64::NAN, |c| c * eps * eps);
        for (lag, m) in &msd {
            out.table.push(vec![eps.into(), (*lag).into(), (*m).into(), (expected * *lag as f64).into()]);
        }
        let slope = msd_slope(&msd);
        let ks = paths
            .iter()
            .map(|p| step_length_ks(space, p))
            .fold(0.0f64, f64::max);
        let longest = paths
            .iter()
            .flat_map(|p| p.windows(2).map(|w| space.distance(&w[0], &w[1])))
            .fold(0.0f64, f64::max);
        out.checks.push(Check::at_most(format!("step length at scale {eps:e}"), longest, eps));
        if expected_rate.is_some() {
            let rel = (slope - expected).abs() / expected;
            out.checks.push(Check::at_most(format!("msd slope at scale {eps:e}"), rel, MSD_BAND));
        }
        summaries.push(serde_json::json!({
            "scale": eps,
            "msd_slope": Cell::Float(slope).json(),
            "expected_slope": Cell::Float(expected).json(),
            "max_step_ks": Cell::Float(ks).json(),
        }));
        if k == 0 {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &paths[0])?;
            let text = String::from_utf8(buf).expect("trajectory CSV is ASCII");
            out.attachments.push(("walks.trajectory.csv".into(), text));
        }
    }
    out.note("scales", serde_json::Value::Array(summaries));
    out.note("base", coords_text(&x));
    Ok(out)
}

pub fn compat(config: &ExperimentConfig) -> Result<Outcome> {
    let (ds, mut rng) = setup(config)?;
    let x = base_point(config, ds.space(), &mut rng)?;
    let grid = grid_params(ds.space());
    let n = config.samples;
    let floor = 3.0 / (n as f64).sqrt();

    let mut out = Outcome {
        table: Table::new(&[
            "scale",
            "comp1_tv",
            "comp1_sink_pushed",
            "comp1_sink_reference",
            "comp1_noise_band",
            "comp2",
            "comp2_noise_band",
            "comp2_tolerance",
            "comp2_fitted_c",
        ]),
        ..Outcome::default()
    };
    let mut fitted = 0.0f64;
    for &eps in &config.eps_ladder {
        let c1 = comp1_defect(&ds, &x, eps, n, config.partition_cells, &mut rng)?;
        let c2 = comp2_defect(&ds, &x, eps, n, &mut rng)?;
        let (tolerance, c) = match grid {
            Some((h, dim)) => (
                grid_comp2_constant(dim) * h / eps + floor,
                c2.defect * eps / h,
            ),
            None => (floor, f64::NAN),
        };
        fitted = fitted.max(c);
        out.table.push(vec![
            eps.into(),
            c1.tv.tv.into(),
            c1.tv.sink.0.into(),
            c1.tv.sink.1.into(),
            c1.noise_band.into(),
            c2.defect.into(),
            c2.noise_band.into(),
            tolerance.into(),
            c.into(),
        ]);
        if grid.is_none() {
            out.checks.push(Check::at_most(format!("comp1 at scale {eps:e}"), c1.tv.tv, c1.noise_band));
        }
        out.checks.push(Check::at_most(format!("comp2 at scale {eps:e}"), c2.defect, tolerance));
    }
    out.note("base", coords_text(&x));
    if grid.is_some() {
        out.note_float("fitted_c", fitted);
    }
    Ok(out)
}

/// Log-uniform draw from `[lo, hi]`.
fn log_uniform(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn drafts(config: &ExperimentConfig) -> Result<Outcome> {
    let (ds, mut rng) = setup(config)?;
    let x = base_point(config, ds.space(), &mut rng)?;
    let hi = config.eps_ladder[0];
    let lo = *config.eps_ladder.last().expect("ladder is nonempty");
    let exact = !ds.space().is_discrete();

    let mut out = Outcome {
        table: Table::new(&[
            "eps",
            "mu",
            "distance_sup",
            "dilation_sup",
            "dilation_distance_sup",
            "tolerance",
            "kernel_tv",
            "kernel_noise_band",
        ]),
        ..Outcome::default()
    };
    for _ in 0..config.pairs {
        let eps = log_uniform(&mut rng, lo, hi);
        let mu = log_uniform(&mut rng, lo, hi);
        let r = multiple_drafts_defect(&ds, &x, eps, mu, config.samples, config.partition_cells, &mut rng)?;
        let tol = if exact { DRAFTS_TOLERANCE } else { f64::NAN };
        out.table.push(vec![
            eps.into(),
            mu.into(),
            r.distance.sup.into(),
            r.dilation.sup.into(),
            r.dilation_distance.sup.into(),
            tol.into(),
            r.kernel.tv.into(),
            r.kernel_noise_band.into(),
        ]);
        if exact {
            let name = |part: &str| format!("drafts {part} at (eps, mu) = ({eps:e}, {mu:e})");
            for (part, d) in [("distance", &r.distance), ("dilation", &r.dilation)] {
                let check = Check::at_most(name(part), d.sup, DRAFTS_TOLERANCE);
                out.checks.push(check.with_witness(&d.worst_witness));
            }
            out.checks.push(Check::at_most(name("kernel"), r.kernel.tv, r.kernel_noise_band));
        }
    }
    out.note("base", coords_text(&x));
    if !exact {
        out.note("gated", false);
    }
    Ok(out)
}

pub fn distort(config: &ExperimentConfig) -> Result<Outcome> {
    let mut rng = derive_substream(config.seed, config.experiment.name());
    let mut out = Outcome::default();
    if config.scan {
        let report = vertical_distortion_scan(&config.eps_ladder, &config.scan_config, &mut rng)
            .map_err(config_error)?;
        out.table = Table::new(&[
            "scale",
            "best_distortion",
            "lower_bound",
            "upper_bound",
            "pair_count",
            "evaluations",
            "budget_exhausted",
        ]);
        for r in &report.rows {
            out.table.push(vec![
                r.scale.into(),
                r.optimum.distortion.into(),
                (1.0 / r.scale).into(),
                (1.0 / (r.scale * r.scale) + 0.25).sqrt().into(),
                r.pair_count.into(),
                r.optimum.evaluations.into(),
                r.optimum.budget_exhausted.into(),
            ]);
        }
        out.note("fit", serde_json::to_value(&report.fit)?);
        if let Some(slope) = report.fit.slope() {
            out.checks.push(Check::at_most("distortion slope", (slope + 1.0).abs(), 0.1));
        } else {
            out.checks.push(Check::at_most("distortion slope", f64::NAN, 0.1));
        }
    }
    if let Some(path) = &config.candidate {
        let candidate = LinearMapCandidate::load(path).map_err(config_error)?;
        let report = morphism_defect(&candidate, config.samples, &mut rng).map_err(config_error)?;
        let mut table = Table::new(&["quantity", "sup", "mean"]);
        table.push(vec!["morphism".into(), report.morphism.sup.into(), report.morphism.mean.into()]);
        table.push(vec!["dilation".into(), report.dilation.sup.into(), report.dilation.mean.into()]);
        out.note("candidate", serde_json::to_value(&report)?);
        if config.scan {
            out.attachments.push(("distort.candidate.csv".into(), table.to_csv()));
        } else {
            out.table = table;
        }
    }
    Ok(out)
}
