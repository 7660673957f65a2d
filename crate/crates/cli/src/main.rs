//! `hotline`: generate traces, learn hot sets, simulate and sweep the
//! training pipeline.
//!
//! Exit codes: 0 on success, 2 for configuration or input validation
//! errors, 3 for runtime failures.

mod commands;
mod config;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hotline_core::eal::EalError;
use hotline_core::pipeline::PipelineError;
use hotline_core::sched::SchedError;
use hotline_core::trace::TraceError;

use config::RunConfig;

/// An error in the configuration or the input data.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser)]
#[command(
    name = "hotline",
    version,
    about = "Popularity-aware recommendation training pipeline simulator"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trace file format: tsv or bin.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Relearn the hot set every K working sets.
    #[arg(long, global = true, value_name = "K")]
    recal_every_k_ws: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Zipf trace.
    Gen {
        /// Number of inputs, overriding the configuration.
        #[arg(long)]
        inputs: Option<u64>,
    },
    /// Access histograms and hot-capacity coverage.
    Analyze {
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Hot capacities in bytes.
        #[arg(long, value_delimiter = ',')]
        capacity: Option<Vec<u64>>,
    },
    /// Learn a hot set from sampled mini-batches.
    Learn {
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Simulate one training mode.
    Simulate {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Hotline)]
        mode: Mode,
        /// Use this hot set instead of learning one.
        #[arg(long)]
        hotset: Option<PathBuf>,
    },
    /// Sweep one design dimension.
    Sweep {
        #[arg(value_enum)]
        dimension: sweep::Dimension,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Grid of the swept value.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u64>>,
        /// Bank counts for `banks-queue`.
        #[arg(long, value_delimiter = ',')]
        banks: Option<Vec<usize>>,
        /// Queue sizes for `banks-queue`.
        #[arg(long, value_delimiter = ',')]
        queues: Option<Vec<usize>>,
    },
    /// Summarize the simulation reports in the output directory.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hotline,
    Hybrid,
    GpuOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Hotline => "hotline",
            Mode::Hybrid => "hybrid",
            Mode::GpuOnly => "gpu_only",
        }
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(format) = &cli.format {
        cfg.format = format.clone();
    }
    if let Some(k) = cli.recal_every_k_ws {
        cfg.learn.recalibration_period = Some(k);
    }
    if let Command::Gen { inputs: Some(n) } = cli.command {
        cfg.trace.num_inputs = n;
    }
    cfg.finalize()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Gen { .. } => commands::gen(&cfg),
        Command::Analyze { trace, capacity } => commands::analyze(&cfg, trace.as_deref(), capacity),
        Command::Learn { trace } => commands::learn(&cfg, trace.as_deref()),
        Command::Simulate {
            trace,
            mode,
            hotset,
        } => commands::simulate(&cfg, trace.as_deref(), mode, hotset.as_deref()),
        Command::Sweep {
            dimension,
            trace,
            grid,
            banks,
            queues,
        } => sweep::run(&cfg, dimension, trace.as_deref(), grid, banks, queues),
        Command::Report => commands::report(&cfg),
    }
}

/// 2 for bad configuration or input, 3 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|cause| {
        if cause.is::<ConfigError>() {
            return true;
        }
        if let Some(e) = cause.downcast_ref::<TraceError>() {
            return !matches!(e, TraceError::Io(_));
        }
        if let Some(e) = cause.downcast_ref::<EalError>() {
            return matches!(e, EalError::InvalidConfig(_) | EalError::EmptyTrace);
        }
        if let Some(e) = cause.downcast_ref::<SchedError>() {
            return matches!(e, SchedError::InvalidConfig(_) | SchedError::EmptyStream);
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return matches!(
                e,
                PipelineError::InvalidCost(_) | PipelineError::EmptyStream
            );
        }
        false
    });
    if config {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        let e = anyhow::Error::new(TraceError::EmptyTrace);
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(PipelineError::OutOfMemory {
            model_bytes: 1,
            min_gpus: 2,
            num_gpus: 1,
        });
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::new(ConfigError("x".into())).context("while loading");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
