//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::checks::cmd_check;
use crate::config::{parse_alpha, Experiment, OperatorArg, RunConfig, Scenario, Settings};
use crate::error::CliError;
use crate::experiments::{cmd_eigenfunctions, cmd_euclidean, cmd_paleo, cmd_sphere};

#[derive(Debug, Parser)]
#[command(name = "riemann-stein", version, about = "Stein-kernel quadrature experiments on manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Worst-case error and moments on R^d with a Gaussian target.
    Euclidean(Flags),
    /// Worst-case error and moments on the sphere with a von Mises-Fisher target.
    Sphere(Flags),
    /// Leading Nystrom eigenfunctions of the sphere Stein kernel.
    Eigenfunctions(Flags),
    /// Posterior moments and KSD for the paleomagnetic model.
    Paleo(Flags),
    /// Runs every oracle and invariant check.
    Check(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Dimension of the Euclidean experiment.
    #[arg(long)]
    pub d: Option<usize>,
    /// Comma-separated smoothness values, e.g. `7/2,9/2` or `3.5`.
    #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorArg>,
    #[arg(long, value_enum)]
    pub points: Option<Scenario>,
    /// Comma-separated point-set sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with any of the settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pole observations (`y1,y2,y3` or `lat_deg,lon_deg`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the built-in synthetic pole data.
    #[arg(long)]
    pub synthetic: bool,
    /// Smaller grids and fewer replicates.
    #[arg(long)]
    pub fast: bool,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            d: self.d,
            n: self.n.clone(),
            alpha: self.alpha.clone(),
            operator: self.operator,
            points: self.points,
            reps: self.reps,
            seed: self.seed,
            out: self.out.clone(),
            data: self.data.clone(),
            synthetic: self.synthetic.then_some(true),
            fast: self.fast.then_some(true),
            ..Settings::default()
        }
    }

    /// Flags over the optional TOML file, then defaults.
    pub fn resolve(&self, experiment: Experiment) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => Settings::from_toml_file(path)?,
            None => Settings::default(),
        };
        RunConfig::resolve(experiment, self.settings().over(file))
    }
}

impl Command {
    pub fn experiment(&self) -> (Experiment, &Flags) {
        match self {
            Command::Euclidean(f) => (Experiment::Euclidean, f),
            Command::Sphere(f) => (Experiment::Sphere, f),
            Command::Eigenfunctions(f) => (Experiment::Eigenfunctions, f),
            Command::Paleo(f) => (Experiment::Paleo, f),
            Command::Check(f) => (Experiment::Check, f),
        }
    }
}

/// Resolves the configuration and runs the command, printing the files written.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (experiment, flags) = cli.command.experiment();
    let cfg = flags.resolve(experiment)?;
    let out = match experiment {
        Experiment::Euclidean => cmd_euclidean(&cfg)?,
        Experiment::Sphere => cmd_sphere(&cfg)?,
        Experiment::Eigenfunctions => cmd_eigenfunctions(&cfg)?,
        Experiment::Paleo => cmd_paleo(&cfg)?,
        Experiment::Check => {
            cmd_check(&cfg)?;
            return Ok(());
        }
    };
    for (name, _, table) in &out.files {
        println!("wrote {} ({} rows)", cfg.out.join(name).display(), table.rows.len());
    }
    Ok(())
}
