//! Experiment configuration.
//!
//! A run is described by a flat JSON object; every key is optional and
//! command-line flags override file values. Unknown keys are rejected.
//!
//! | key               | meaning                                              |
//! |-------------------|------------------------------------------------------|
//! | `experiment`      | axioms, tangent, walks, compat, groupoid, drafts, distort |
//! | `space`           | `euclidean:N`, `heisenberg`, `snowflake:A[:N]`, `grid:H[:N[:L]]` |
//! | `eps_ladder`      | strictly decreasing positive scales                  |
//! | `samples`         | samples per scale (kernels, axiom checks)            |
//! | `pairs`           | tangent pairs, or `(ε, μ)` pairs for drafts          |
//! | `steps`           | explorer steps per trajectory                        |
//! | `trajectories`    | explorer trajectories                                |
//! | `partition_cells` | boxes of the TV partition                            |
//! | `seed`            | 64-bit seed                                          |
//! | `base`            | base point coordinates (sampled when absent)         |
//! | `chart_radius`, `chart_slack` | chart domain `B(x, R)` and its slack     |
//! | `scan`, `candidate` | distort: run the vertical scan / audit a matrix file |
//! | `budget`, `starts` | distort scan optimiser                              |
//! | `out`, `format`   | output directory, `csv` or `json`                    |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dilation::ChartConfig;
use crate::error::{Error, Result};
use crate::roughmap::ScanConfig;
use crate::space::SpaceKind;
use crate::tangent::pow2_ladder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Axioms,
    Tangent,
    Walks,
    Compat,
    Groupoid,
    Drafts,
    Distort,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Axioms => "axioms",
            Experiment::Tangent => "tangent",
            Experiment::Walks => "walks",
            Experiment::Compat => "compat",
            Experiment::Groupoid => "groupoid",
            Experiment::Drafts => "drafts",
            Experiment::Distort => "distort",
        }
    }

    fn default_ladder(self) -> Vec<f64> {
        match self {
            Experiment::Tangent => pow2_ladder(1, 12),
            Experiment::Axioms | Experiment::Groupoid | Experiment::Compat => pow2_ladder(0, 10),
            Experiment::Walks => vec![0.1],
            Experiment::Drafts => vec![1.0, 2f64.powi(-10)],
            Experiment::Distort => pow2_ladder(0, 8),
        }
    }

    fn default_samples(self) -> usize {
        match self {
            Experiment::Walks | Experiment::Compat => 10_000,
            _ => 1_000,
        }
    }

    fn default_pairs(self) -> usize {
        match self {
            Experiment::Drafts => 20,
            _ => 100,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Partial configuration as read from a file or assembled from flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub experiment: Option<Experiment>,
    pub space: Option<String>,
    pub eps_ladder: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub pairs: Option<usize>,
    pub steps: Option<usize>,
    pub trajectories: Option<usize>,
    pub partition_cells: Option<usize>,
    pub seed: Option<u64>,
    pub base: Option<Vec<f64>>,
    pub chart_radius: Option<f64>,
    pub chart_slack: Option<f64>,
    pub scan: Option<bool>,
    pub candidate: Option<PathBuf>,
    pub budget: Option<usize>,
    pub starts: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ConfigLayer {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `self` with every value set in `top` replaced.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        macro_rules! pick {
            ($($f:ident),*) => {
                ConfigLayer { $($f: top.$f.or(self.$f)),* }
            };
        }
        pick!(
            experiment,
            space,
            eps_ladder,
            samples,
            pairs,
            steps,
            trajectories,
            partition_cells,
            seed,
            base,
            chart_radius,
            chart_slack,
            scan,
            candidate,
            budget,
            starts,
            out,
            format
        )
    }
}

/// A complete, validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub space: SpaceKind,
    pub eps_ladder: Vec<f64>,
    pub samples: usize,
    pub pairs: usize,
    pub steps: usize,
    pub trajectories: usize,
    pub partition_cells: usize,
    pub seed: u64,
    pub base: Option<Vec<f64>>,
    pub chart: ChartConfig,
    pub scan: bool,
    pub candidate: Option<PathBuf>,
    pub scan_config: ScanConfig,
    pub out: PathBuf,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<Self> {
        let experiment = layer
            .experiment
            .ok_or_else(|| Error::Config("no experiment given".into()))?;
        let space_text = layer.space.unwrap_or_else(|| "euclidean:2".to_string());
        let space: SpaceKind = space_text
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let chart_default = ChartConfig::default();
        let scan_default = ScanConfig::default();
        let config = Self {
            experiment,
            space,
            eps_ladder: layer
                .eps_ladder
                .unwrap_or_else(|| experiment.default_ladder()),
            samples: layer.samples.unwrap_or(experiment.default_samples()),
            pairs: layer.pairs.unwrap_or(experiment.default_pairs()),
            steps: layer.steps.unwrap_or(10_000),
            trajectories: layer.trajectories.unwrap_or(32),
            partition_cells: layer.partition_cells.unwrap_or(64),
            seed: layer.seed.unwrap_or(0),
            base: layer.base,
            chart: ChartConfig {
                radius: layer.chart_radius.unwrap_or(chart_default.radius),
                slack: layer.chart_slack.unwrap_or(chart_default.slack),
            },
            scan: layer.scan.unwrap_or(layer.candidate.is_none()),
            candidate: layer.candidate,
            scan_config: ScanConfig {
                budget: layer.budget.unwrap_or(scan_default.budget),
                starts: layer.starts.unwrap_or(scan_default.starts),
                ..scan_default
            },
            out: layer.out.unwrap_or_else(|| PathBuf::from("out")),
            format: layer.format.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let counts = [
            ("samples", self.samples),
            ("pairs", self.pairs),
            ("steps", self.steps),
            ("trajectories", self.trajectories),
            ("partition_cells", self.partition_cells),
            ("budget", self.scan_config.budget),
            ("starts", self.scan_config.starts),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{name}` must be at least 1")));
        }
        if self.eps_ladder.is_empty() {
            return Err(Error::Config("the scale ladder is empty".into()));
        }
        if self.eps_ladder.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("ladder scales must be positive and finite".into()));
        }
        if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("ladder scales must be strictly decreasing".into()));
        }
        if self.experiment == Experiment::Distort && !self.scan && self.candidate.is_none() {
            return Err(Error::Config("distort needs --scan or --candidate".into()));
        }
        Ok(())
    }
}

/// Parses `a,b,c` or `pow2:A:B` (meaning `2^-A, …, 2^-B`).
pub fn parse_ladder(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("malformed ladder `{text}`"));
    if let Some(rest) = text.strip_prefix("pow2:") {
        let (a, b) = rest.split_once(':').ok_or_else(bad)?;
        let a: i32 = a.trim().parse().map_err(|_| bad())?;
        let b: i32 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok(pow2_ladder(a, b));
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

pub fn parse_coords(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("malformed coordinates `{text}`")))
        })
        .collect()
}
