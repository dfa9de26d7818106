use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steamnet::simulate::ModelKind;
use steamnet_cli::run::{self, parse_tol};
use steamnet_cli::{CliError, Config, Overrides};

/// Steam supply network dynamics: lumped and inner-limit simulation,
/// equilibrium and spectral analysis, slow-manifold tracing, and comparison
/// against a finite-volume pipe model.
#[derive(Parser, Debug)]
#[command(name = "steamnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: step, periodic or oracle.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sample spacing in seconds (overrides the config).
    #[arg(long, value_name = "DT")]
    samples: Option<f64>,
    /// Skip SVG figures.
    #[arg(long)]
    no_plots: bool,
    /// Integrator tolerances.
    #[arg(long, value_name = "REL,ABS", value_parser = parse_tol)]
    tol: Option<(f64, f64)>,
    /// Treat validity-ratio warnings as errors (exit 4).
    #[arg(long)]
    strict: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Model {
    Full,
    InnerLimit,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the scenario; writes timeseries.csv and timeseries.svg.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Model to integrate (overrides the config).
        #[arg(long, value_enum)]
        model: Option<Model>,
    },
    /// Flow equilibrium of the inner-limit model for the inputs at --at.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Input time in seconds (default: end of the scenario).
        #[arg(long, value_name = "T")]
        at: Option<f64>,
    },
    /// Eigenvalues and normal-hyperbolicity certificate at the equilibrium.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "T")]
        at: Option<f64>,
    },
    /// Trace the slow manifold over the trajectory's mean-pressure range.
    Manifold {
        #[command(flatten)]
        common: Common,
        /// Samples per traced curve (overrides the config).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run the lumped model and the finite-volume oracle and compare them.
    OracleCompare {
        #[command(flatten)]
        common: Common,
    },
    /// Check the saturation table and scaled parameters against their anchors.
    ThermoCheck {
        /// Also write thermo_check.json here.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common, default_preset: &str, model: Option<Model>) -> Result<(Config, Overrides), CliError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => Config::from_path(path)?,
        (None, Some(name)) => Config::preset(name)?,
        (None, None) => Config::preset(default_preset)?,
    };
    let ov = Overrides {
        out: common.out.clone(),
        samples_s: common.samples,
        no_plots: common.no_plots,
        tol: common.tol,
        strict: common.strict,
        model: model.map(|m| match m {
            Model::Full => ModelKind::Full,
            Model::InnerLimit => ModelKind::InnerLimit,
        }),
    };
    ov.apply(&mut cfg)?;
    Ok((cfg, ov))
}

fn execute(cmd: Command) -> Result<(), CliError> {
    let body = match cmd {
        Command::Simulate { common, model } => {
            let (cfg, ov) = load(&common, "step", model)?;
            run::simulate(&cfg, &ov)?
        }
        Command::Equilibrium { common, at } => {
            let (cfg, _) = load(&common, "step", None)?;
            run::equilibrium(&cfg, at)?
        }
        Command::Spectrum { common, at } => {
            let (cfg, _) = load(&common, "step", None)?;
            run::spectrum(&cfg, at)?
        }
        Command::Manifold { common, points } => {
            let (cfg, ov) = load(&common, "periodic", None)?;
            run::manifold(&cfg, &ov, points)?
        }
        Command::OracleCompare { common } => {
            let (cfg, ov) = load(&common, "oracle", None)?;
            run::oracle_compare(&cfg, &ov)?
        }
        Command::ThermoCheck { out } => {
            let (body, failure) = run::thermo_check(out.as_deref())?;
            run::print(&body);
            return failure.map_or(Ok(()), Err);
        }
    };
    run::print(&body);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
