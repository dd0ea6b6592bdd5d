use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratelat_cli::{run, Experiment, ExperimentSpec, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "ratelat", version, about = "Latency of static and dynamic rate adaptation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration layered over the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "RATELAT_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// `section.key=value`, repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Meta distribution curves, analytic and simulated.
    Meta,
    /// Latency of every scheme for every success-probability class.
    LatencyClass,
    /// Spatially averaged latency across packet sizes.
    LatencySize {
        /// `key=start:stop:step` or `key=v1,v2,...`; defaults to 20..=120 bytes.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Slot-level simulation on sampled fields.
    Simulate,
}

fn build_spec(cli: Cli) -> anyhow::Result<ExperimentSpec> {
    let (experiment, sweep) = match cli.command {
        Command::Meta => (Experiment::MetaCurves, None),
        Command::LatencyClass => (Experiment::LatencyPerClass, None),
        Command::LatencySize { sweep } => (
            Experiment::LatencyVsPacketSize,
            sweep.as_deref().map(SweepAxis::parse).transpose()?,
        ),
        Command::Simulate => (Experiment::Custom, None),
    };
    let mut spec = ExperimentSpec::new(experiment, cli.common.out);
    if let Some(path) = &cli.common.config {
        spec = spec.with_config_file(path)?;
    }
    spec.overrides = cli.common.overrides;
    spec.seed = cli.common.seed;
    spec.sweep = sweep;
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match build_spec(cli).and_then(|spec| run(&spec)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
