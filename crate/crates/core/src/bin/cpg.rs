use std::f64::consts::TAU;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cpg::analysis::SettleTolerance;
use cpg::cli::{self, Demo, Pacing};
use cpg::config::Overrides;
use cpg::{Integrator, Result};

/// Coupled-oscillator gait generator for a three-joint hexapod.
///
/// Exit codes: 0 ok, 2 parse error, 3 validation error, 4 divergence, 1 i/o.
#[derive(Parser)]
#[command(name = "cpg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML config and write a CSV trace plus an events sidecar.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        integrator: Option<Integrator>,
        #[arg(long, short)]
        output: Option<String>,
        /// Extra gait manifest layered over the bundled presets.
        #[arg(long)]
        gaits: Option<PathBuf>,
    },
    /// Inspect gait presets.
    Gaits {
        #[command(subcommand)]
        action: GaitsAction,
    },
    /// Run a canned experiment: recovery, transitions or sync.
    Demo {
        name: Demo,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        integrator: Option<Integrator>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Stream joint angles in degrees, one `t,theta1,theta2,theta3` line per tick.
    Stream {
        config: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        rate: f64,
        /// Emit as fast as possible instead of pacing against the wall clock.
        #[arg(long)]
        no_pace: bool,
        #[arg(long)]
        gaits: Option<PathBuf>,
    },
    /// Report settling time and locking error of a CSV trace.
    Analyze {
        trace: PathBuf,
        /// Config whose final parameters define the target pattern.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Bundled preset defining the target pattern.
        #[arg(long)]
        preset: Option<String>,
        /// Phase tolerance in radians.
        #[arg(long, default_value_t = cpg::analysis::DEFAULT_PHASE_TOL)]
        phase_tol: f64,
        /// Amplitude tolerance in degrees.
        #[arg(long, default_value_t = cpg::analysis::DEFAULT_AMPLITUDE_TOL_DEG)]
        amplitude_tol: f64,
    },
}

#[derive(Subcommand)]
enum GaitsAction {
    /// Print every preset with its tables and provenance.
    List {
        #[arg(long)]
        gaits: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            duration,
            dt,
            seed,
            integrator,
            output,
            gaits,
        } => {
            let registry = cli::load_registry(gaits.as_deref())?;
            let overrides = Overrides {
                duration,
                dt,
                seed,
                integrator,
                output,
            };
            println!("{}", cli::cmd_simulate(&config, &overrides, &registry)?);
        }
        Command::Gaits {
            action: GaitsAction::List { gaits },
        } => {
            print!("{}", cli::cmd_gaits_list(&cli::load_registry(gaits.as_deref())?));
        }
        Command::Demo {
            name,
            output,
            integrator,
            dt,
        } => {
            let output = output.unwrap_or_else(|| PathBuf::from(format!("{}.csv", demo_name(name))));
            println!("{}", cli::cmd_demo(name, &output, integrator, dt)?);
        }
        Command::Stream {
            config,
            rate,
            no_pace,
            gaits,
        } => {
            let registry = cli::load_registry(gaits.as_deref())?;
            let cfg = cli::load_config(&config, &Overrides::default(), &registry)?;
            let pacing = if no_pace { Pacing::Unpaced } else { Pacing::WallClock };
            let stdout = io::stdout();
            cli::cmd_stream(&cfg.schedule, rate, pacing, BufWriter::new(stdout.lock()), |msg| {
                eprintln!("warning: {msg}")
            })?;
        }
        Command::Analyze {
            trace,
            config,
            preset,
            phase_tol,
            amplitude_tol,
        } => {
            let params = match (config, preset) {
                (Some(path), _) => cli::load_config(&path, &Overrides::default(), &cli::load_registry(None)?)?
                    .schedule
                    .final_params()?,
                (None, Some(name)) => cpg::preset(&name)?.params(vec![TAU; 3]),
                (None, None) => unreachable!("clap requires one of --config/--preset"),
            };
            let tol = SettleTolerance {
                phase: phase_tol,
                amplitude: amplitude_tol,
            };
            print!("{}", cli::cmd_analyze(&trace, &params, tol)?);
        }
    }
    Ok(())
}

fn demo_name(d: Demo) -> &'static str {
    match d {
        Demo::Recovery => "recovery",
        Demo::Transitions => "transitions",
        Demo::Sync => "sync",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
