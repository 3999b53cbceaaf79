//! Command-line driver: argument parsing, configuration resolution and the study commands.

pub mod commands;
pub mod config;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{parse_list, CommandKind, Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} realization(s) did not converge")]
    NonConvergence(usize),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl From<rvehom_core::Error> for CliError {
    fn from(e: rvehom_core::Error) -> Self {
        match e {
            rvehom_core::Error::Parameter(m) => CliError::Config(m),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rvehom", version, about = "Periodic RVE homogenization studies for random two-phase media")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Sample one coefficient field and write its dump and center list.
    Field,
    /// Homogenize a range of realizations, one CSV row each.
    Solve,
    /// Ensemble statistics over a list of RVE sizes.
    Sweep,
    /// Grid refinement study for one geometry.
    Refine,
    /// Dense spectra and densities of states.
    Dos,
    /// Timings of field sampling, assembly and solves per RVE size.
    Bench,
}

impl Command {
    pub fn kind(self) -> CommandKind {
        match self {
            Command::Field => CommandKind::Field,
            Command::Solve => CommandKind::Solve,
            Command::Sweep => CommandKind::Sweep,
            Command::Refine => CommandKind::Refine,
            Command::Dos => CommandKind::Dos,
            Command::Bench => CommandKind::Bench,
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Parameter file or inline `key=value` pairs (repeatable; later wins).
    #[arg(long, global = true, value_name = "FILE|K=V")]
    pub params: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "n-realizations", short = 'N', global = true)]
    pub n_realizations: Option<usize>,
    /// Comma-separated RVE sizes, e.g. `2,4,8,16`.
    #[arg(long = "L-list", global = true, value_name = "LIST")]
    pub l_list: Option<String>,
    /// Comma-separated grid sizes for `refine`.
    #[arg(long = "grid-list", global = true, value_name = "LIST")]
    pub grid_list: Option<String>,
    /// First realization index.
    #[arg(long, global = true)]
    pub index: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Preconditioner shift.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// DOS broadening width (default: 2% of the spectral width).
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Evaluate realizations on one thread in index order.
    #[arg(long, global = true)]
    pub serial: bool,
    /// Exit with status 3 if any solve fails to converge.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long = "out-dir", global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Also write the assembled operator as MatrixMarket.
    #[arg(long = "dump-matrix", global = true)]
    pub dump_matrix: bool,
}

impl Flags {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let mut o = Overrides::default();
        for src in &self.params {
            o.apply_source(src)?;
        }
        let mut f = Overrides {
            seed: self.seed,
            n_realizations: self.n_realizations,
            first_index: self.index,
            tol: self.tol,
            delta: self.delta,
            max_iter: self.max_iter,
            eta: self.eta.map(Some),
            workers: self.workers.map(Some),
            serial: self.serial.then_some(true),
            strict: self.strict.then_some(true),
            dump_matrix: self.dump_matrix.then_some(true),
            ..Overrides::default()
        };
        if let Some(v) = &self.l_list {
            f.l_list = Some(parse_list("L-list", v)?);
        }
        if let Some(v) = &self.grid_list {
            f.grid_list = Some(parse_list("grid-list", v)?);
        }
        o.overlay(f);
        Ok(o)
    }
}

/// Resolves the configuration for a parsed command line.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    cli.flags.overrides()?.resolve(cli.command.kind())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    if let Some(w) = cfg.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            log::warn!("worker pool already initialized: {e}");
        }
    }
    std::fs::create_dir_all(&cli.flags.out_dir)?;
    commands::execute(&cfg, &cli.flags.out_dir)
}
