//! Command implementations behind the `cpg` binary.
//!
//! Every command returns [`Result`]; the binary maps errors to exit codes
//! with [`Error::exit_code`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::analysis::{self, SettleTolerance};
use crate::config::{ConfigDocument, Overrides, ValidatedConfig};
use crate::error::{Error, Result};
use crate::gaits::GaitRegistry;
use crate::network::{Integrator, NetworkParams};
use crate::sim::{self, boundary_index, Runner, Schedule, Trace};
use crate::trace_io;

/// Default trace path when neither the config nor the command line names one.
pub const DEFAULT_TRACE_PATH: &str = "trace.csv";

pub fn load_registry(manifest: Option<&Path>) -> Result<GaitRegistry> {
    match manifest {
        None => Ok(GaitRegistry::bundled().clone()),
        Some(path) => GaitRegistry::bundled_with(&std::fs::read_to_string(path)?),
    }
}

pub fn load_config(
    path: &Path,
    overrides: &Overrides,
    registry: &GaitRegistry,
) -> Result<ValidatedConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut doc = ConfigDocument::parse(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    doc.apply_overrides(overrides);
    doc.validate_with(registry)
}

/// `foo.csv` -> `foo.events.csv`.
pub fn sidecar_path(trace_path: &Path) -> PathBuf {
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    trace_path.with_file_name(format!("{stem}.events.csv"))
}

fn write_outputs(trace: &Trace, path: &Path) -> Result<PathBuf> {
    trace_io::write_trace(trace, BufWriter::new(File::create(path)?))?;
    let sidecar = sidecar_path(path);
    trace_io::write_events(&trace.markers, BufWriter::new(File::create(&sidecar)?))?;
    Ok(sidecar)
}

fn summary(trace: &Trace, params: &NetworkParams, path: &Path) -> Result<String> {
    let last = trace.len() - 1;
    let lock = analysis::locking_error(&trace.state_at(last), params)?;
    let settle = analysis::settling_time(trace, params, SettleTolerance::default())
        .map(|t| format!("{t:.3}"))
        .unwrap_or_else(|| "none".into());
    Ok(format!(
        "ok samples={} settling_time_s={settle} final_lock_error_rad={:.3e} locked={} output={}",
        trace.len(),
        lock.max_error,
        lock.locked,
        path.display()
    ))
}

/// Runs a config file and writes the trace plus its events sidecar.
/// Returns the one-line summary.
pub fn cmd_simulate(config: &Path, overrides: &Overrides, registry: &GaitRegistry) -> Result<String> {
    let cfg = load_config(config, overrides, registry)?;
    let trace = sim::run(&cfg.schedule)?;
    let path = PathBuf::from(cfg.output.path.as_deref().unwrap_or(DEFAULT_TRACE_PATH));
    write_outputs(&trace, &path)?;
    summary(&trace, &cfg.schedule.final_params()?, &path)
}

pub fn cmd_gaits_list(registry: &GaitRegistry) -> String {
    registry.iter().map(|p| p.describe()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    Recovery,
    Transitions,
    Sync,
}

impl Demo {
    pub fn schedule(self) -> Schedule {
        match self {
            Demo::Recovery => sim::recovery_demo(),
            Demo::Transitions => sim::transitions_demo(),
            Demo::Sync => sim::sync_demo(),
        }
    }
}

impl std::str::FromStr for Demo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recovery" => Ok(Demo::Recovery),
            "transitions" => Ok(Demo::Transitions),
            "sync" => Ok(Demo::Sync),
            other => Err(Error::Parse(format!(
                "unknown demo `{other}` (expected recovery, transitions or sync)"
            ))),
        }
    }
}

/// Runs a canned experiment and writes its trace and events sidecar.
pub fn cmd_demo(
    demo: Demo,
    output: &Path,
    integrator: Option<Integrator>,
    dt: Option<f64>,
) -> Result<String> {
    let mut schedule = demo.schedule();
    if let Some(i) = integrator {
        schedule.integrator = i;
    }
    if let Some(dt) = dt {
        schedule.dt = dt;
        if schedule.sample_count() > sim::MAX_UNDECIMATED_SAMPLES {
            // keep roughly the default 0.01 s sample spacing
            schedule.decimation = Some(((0.01 / dt).round() as usize).max(1));
        }
    }
    let trace = sim::run(&schedule)?;
    let sidecar = write_outputs(&trace, output)?;
    Ok(format!(
        "{} events={}",
        summary(&trace, &schedule.final_params()?, output)?,
        sidecar.display()
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Sleep so that tick `m` is emitted at `m / rate` seconds of wall time.
    WallClock,
    /// Emit as fast as possible.
    Unpaced,
}

/// Emits `t_s,theta1_deg,...` lines at `rate_hz` until the schedule ends.
///
/// Returns the number of lines written. `warn` receives at most one message
/// per kind of pacing problem.
pub fn cmd_stream<W: Write>(
    schedule: &Schedule,
    rate_hz: f64,
    pacing: Pacing,
    mut out: W,
    mut warn: impl FnMut(&str),
) -> Result<usize> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidSchedule(format!("stream rate {rate_hz} Hz must be positive")));
    }
    if rate_hz * schedule.dt > 1.0 + 1e-9 {
        warn(&format!(
            "stream rate {rate_hz} Hz exceeds the simulation step rate {} Hz; ticks repeat states",
            1.0 / schedule.dt
        ));
    }
    let mut runner = Runner::new(schedule)?;
    let period = 1.0 / rate_hz;
    let start = Instant::now();
    let mut behind_warned = false;
    let mut lines = 0;
    for tick in 0.. {
        let t = tick as f64 * period;
        if t >= schedule.duration - 1e-9 {
            break;
        }
        let target = boundary_index(t, schedule.dt);
        loop {
            runner.apply_due_events()?;
            if runner.simulation().step_index() >= target {
                break;
            }
            runner.step()?;
        }
        if pacing == Pacing::WallClock {
            let deadline = start + Duration::from_secs_f64(t);
            let now = Instant::now();
            if now < deadline {
                std::thread::sleep(deadline - now);
            } else if (now - deadline).as_secs_f64() > period && !behind_warned {
                warn("stream is falling behind wall clock; pacing best-effort");
                behind_warned = true;
            }
        }
        let sim = runner.simulation();
        writeln!(out, "{}", trace_io::stream_line(sim.time(), &sim.outputs()))?;
        out.flush()?;
        lines += 1;
    }
    Ok(lines)
}

/// Key-value report for a CSV trace against the given parameters.
pub fn cmd_analyze(trace_path: &Path, params: &NetworkParams, tol: SettleTolerance) -> Result<String> {
    let trace = trace_io::read_trace(BufReader::new(File::open(trace_path)?))?;
    if trace.is_empty() {
        return Err(Error::Parse(format!("{} has no samples", trace_path.display())));
    }
    analysis::report(&trace, params, tol)
}
