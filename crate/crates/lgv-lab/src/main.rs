//! `lgv`: config-driven experiments on weight-space surrogates for
//! transfer attacks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lgv_lab::config::load_config;
use lgv_lab::harness::{self, GeometryProbe, SweepParam};

#[derive(Parser)]
#[command(
    name = "lgv",
    about = "Weight collection, surrogate construction, transfer attacks and loss-geometry probes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Dotted-path overrides, e.g. --set attack.epsilon=0.05
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    Rays,
    Interpolate,
    Hessian,
    Disk,
    Pca,
}

impl From<ProbeArg> for GeometryProbe {
    fn from(p: ProbeArg) -> Self {
        match p {
            ProbeArg::Rays => GeometryProbe::Rays,
            ProbeArg::Interpolate => GeometryProbe::Interpolate,
            ProbeArg::Hessian => GeometryProbe::Hessian,
            ProbeArg::Disk => GeometryProbe::Disk,
            ProbeArg::Pca => GeometryProbe::Pca,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Lr,
    Epochs,
    WeightsPerEpoch,
    Iterations,
    Sigma,
    Gamma,
    C,
}

impl From<ParamArg> for SweepParam {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Lr => SweepParam::Lr,
            ParamArg::Epochs => SweepParam::Epochs,
            ParamArg::WeightsPerEpoch => SweepParam::WeightsPerEpoch,
            ParamArg::Iterations => SweepParam::Iterations,
            ParamArg::Sigma => SweepParam::Sigma,
            ParamArg::Gamma => SweepParam::Gamma,
            ParamArg::C => SweepParam::C,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the targets and the per-seed initial (and donor) models.
    Train(ConfigArgs),
    /// Collect LGV weights along a constant-learning-rate run per seed.
    Collect(ConfigArgs),
    /// Craft attacks for every surrogate recipe and score transfer.
    Attack(ConfigArgs),
    /// Loss-landscape probes over trained weights.
    Geometry {
        #[arg(value_enum)]
        probe: ProbeArg,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-run the pipeline across one hyperparameter's values.
    Sweep {
        #[arg(value_enum)]
        param: ParamArg,
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated values; defaults per parameter.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Print the built-in benchmark configuration as JSON.
    PrintConfig,
}

fn run() -> lgv_lab::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => harness::cmd_train(load_config(&args.config, &args.set)?),
        Command::Collect(args) => harness::cmd_collect(load_config(&args.config, &args.set)?),
        Command::Attack(args) => harness::cmd_attack(load_config(&args.config, &args.set)?),
        Command::Geometry { probe, config } => {
            harness::cmd_geometry(load_config(&config.config, &config.set)?, probe.into())
        }
        Command::Sweep {
            param,
            config,
            values,
        } => harness::cmd_sweep(load_config(&config.config, &config.set)?, param.into(), values),
        Command::PrintConfig => {
            let cfg = lgv_lab::RunConfig::standard_blobs();
            println!("{}", serde_json::to_string_pretty(&cfg).unwrap());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
