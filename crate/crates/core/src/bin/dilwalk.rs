//! `dilwalk`: run one experiment and write its table and manifest.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 for
//! usage or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dilwalk::experiment::config::{parse_coords, parse_ladder};
use dilwalk::experiment::{self, ConfigLayer, Experiment, ExperimentConfig, Format};
use dilwalk::Error;

#[derive(Parser)]
#[command(name = "dilwalk", version, about = "Dilation structures and random walks on metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Semigroup, base-fixing and bijectivity defects of the dilations
    Axioms(Common),
    /// Convergence of the rescaled distance, translations and dilations
    Tangent(Common),
    /// Explorer walks and their mean squared displacement
    Walks(Common),
    /// Kernel compatibility defects
    Compat(Common),
    /// Groupoid laws of the approximate translations
    Groupoid(Common),
    /// Snapshot of a snapshot against the snapshot at the product scale
    Drafts(Common),
    /// Distortion of linear maps from the Heisenberg group
    Distort {
        #[command(flatten)]
        common: Common,
        /// Run the vertical distortion scan
        #[arg(long)]
        scan: bool,
        /// JSON file holding a matrix to audit as a group morphism
        #[arg(long)]
        candidate: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// euclidean:N, heisenberg, snowflake:ALPHA[:N] or grid:H[:N[:W]]
    #[arg(long)]
    space: Option<String>,
    /// Comma-separated scales, or pow2:A:B for 2^-A .. 2^-B
    #[arg(long, value_parser = ladder)]
    eps_ladder: Option<Ladder>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    partition_cells: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated base point coordinates
    #[arg(long, value_parser = coords)]
    base: Option<Coords>,
    /// Evaluation budget per scale of the distortion scan
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// JSON config file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Ladder(Vec<f64>);

#[derive(Clone, Debug)]
struct Coords(Vec<f64>);

fn ladder(s: &str) -> Result<Ladder, String> {
    parse_ladder(s).map(Ladder).map_err(|e| e.to_string())
}

fn coords(s: &str) -> Result<Coords, String> {
    parse_coords(s).map(Coords).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl Common {
    fn layer(self, experiment: Experiment) -> ConfigLayer {
        ConfigLayer {
            experiment: Some(experiment),
            space: self.space,
            eps_ladder: self.eps_ladder.map(|l| l.0),
            samples: self.samples,
            pairs: self.pairs,
            steps: self.steps,
            trajectories: self.trajectories,
            partition_cells: self.partition_cells,
            seed: self.seed,
            base: self.base.map(|c| c.0),
            budget: self.budget,
            out: self.out,
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }),
            ..ConfigLayer::default()
        }
    }
}

fn resolve(command: Command) -> Result<ExperimentConfig, Error> {
    let (experiment, common, scan, candidate) = match command {
        Command::Axioms(c) => (Experiment::Axioms, c, None, None),
        Command::Tangent(c) => (Experiment::Tangent, c, None, None),
        Command::Walks(c) => (Experiment::Walks, c, None, None),
        Command::Compat(c) => (Experiment::Compat, c, None, None),
        Command::Groupoid(c) => (Experiment::Groupoid, c, None, None),
        Command::Drafts(c) => (Experiment::Drafts, c, None, None),
        Command::Distort {
            common,
            scan,
            candidate,
        } => (Experiment::Distort, common, scan.then_some(true), candidate),
    };
    let file = match &common.config {
        Some(path) => ConfigLayer::load(path)?,
        None => ConfigLayer::default(),
    };
    if let Some(named) = file.experiment {
        if named != experiment {
            return Err(Error::Config(format!(
                "config file is for `{named}`, not `{experiment}`"
            )));
        }
    }
    let mut flags = common.layer(experiment);
    flags.scan = scan;
    flags.candidate = candidate;
    ExperimentConfig::resolve(file.overlay(flags))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dilwalk: {e}");
            return ExitCode::from(2);
        }
    };
    match experiment::run(&config) {
        Ok((outcome, manifest)) => {
            if let Some(check) = outcome.first_failure() {
                let witness = check
                    .witness
                    .as_ref()
                    .and_then(|w| serde_json::to_string(w).ok())
                    .unwrap_or_else(|| "none".into());
                eprintln!(
                    "dilwalk: invariant `{}` violated: value {:e}, tolerance {:e}, witness {}",
                    check.name, check.value, check.tolerance, witness
                );
                return ExitCode::from(1);
            }
            for path in &manifest.outputs {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(Error::Config(msg)) => {
            eprintln!("dilwalk: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("dilwalk: {e}");
            ExitCode::from(1)
        }
    }
}
