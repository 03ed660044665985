//! Scheduled experiments over a fixed-step integration.
//!
//! A [`Schedule`] fixes the step, the integrator, the starting parameters
//! and state, and a time-ordered list of events. Events bind to the first
//! step boundary at or after their time; parameter updates never touch the
//! state, perturbations add seeded uniform noise to it.

use std::f64::consts::TAU;
use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaits::{self, GaitPreset, ParamUpdate};
use crate::network::{
    derivatives, output_angle, Integrator, NetworkParams, OscillatorState, DEFAULT_DT,
};

/// Undecimated traces longer than this are rejected unless decimation is set.
pub const MAX_UNDECIMATED_SAMPLES: usize = 100_000;

/// Seeded generator used for initial phases and perturbations.
pub type SimRng = ChaCha8Rng;

/// Closed interval of additive offsets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const ZERO: Range = Range { lo: 0.0, hi: 0.0 };

    pub fn symmetric(half_width: f64) -> Self {
        Range {
            lo: -half_width.abs(),
            hi: half_width.abs(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(Error::InvalidSchedule(format!(
                "perturbation range {what} = [{}, {}] is not a finite interval",
                self.lo, self.hi
            )))
        }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        rng.random_range(self.lo..=self.hi)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}:{:.6}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    #[default]
    All,
    /// Zero-based oscillator index.
    Oscillator(usize),
}

/// Uniform additive noise on selected state variables.
///
/// `phi` is in radians; `r`, `x` and their rates in degrees (per second).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    pub phi: Range,
    pub r: Range,
    pub r_dot: Range,
    pub x: Range,
    pub x_dot: Range,
    pub target: Target,
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        self.phi.validate("phi")?;
        self.r.validate("r")?;
        self.r_dot.validate("r_dot")?;
        self.x.validate("x")?;
        self.x_dot.validate("x_dot")
    }

    /// `key=value` description used in event sidecars.
    pub fn describe(&self) -> String {
        let target = match self.target {
            Target::All => "all".to_string(),
            Target::Oscillator(i) => (i + 1).to_string(),
        };
        format!(
            "target={target};phi_rad={};r_deg={};r_dot_deg_s={};x_deg={};x_dot_deg_s={}",
            self.phi, self.r, self.r_dot, self.x, self.x_dot
        )
    }
}

/// Adds one independent uniform sample per targeted variable.
///
/// Draw order is fixed (oscillator, then phi, r, r_dot, x, x_dot), so the
/// result depends only on the inputs and the generator state.
pub fn inject_perturbation(
    states: &[OscillatorState],
    p: &Perturbation,
    rng: &mut SimRng,
) -> Result<Vec<OscillatorState>> {
    p.validate()?;
    if let Target::Oscillator(i) = p.target {
        if i >= states.len() {
            return Err(Error::InvalidSchedule(format!(
                "perturbation targets oscillator {} of {}",
                i + 1,
                states.len()
            )));
        }
    }
    let mut out = states.to_vec();
    for (i, s) in out.iter_mut().enumerate() {
        if matches!(p.target, Target::Oscillator(k) if k != i) {
            continue;
        }
        s.phi += p.phi.sample(rng);
        s.r += p.r.sample(rng);
        s.r_dot += p.r_dot.sample(rng);
        s.x += p.x.sample(rng);
        s.x_dot += p.x_dot.sample(rng);
    }
    if out
        .iter()
        .any(|s| ![s.phi, s.r, s.r_dot, s.x, s.x_dot].iter().all(|v| v.is_finite()))
    {
        return Err(Error::NonFinite("perturbed state".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Update(ParamUpdate),
    Perturb(Perturbation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Requested time, seconds.
    pub time: f64,
    pub kind: EventKind,
    /// Free-form tag carried into the sidecar, e.g. `preset=forward`.
    pub label: String,
}

impl Event {
    pub fn update(time: f64, update: ParamUpdate, label: impl Into<String>) -> Self {
        Event {
            time,
            kind: EventKind::Update(update),
            label: label.into(),
        }
    }

    pub fn preset(time: f64, preset: &GaitPreset) -> Self {
        Event::update(time, preset.as_update(), format!("preset={}", preset.name))
    }

    pub fn perturb(time: f64, p: Perturbation) -> Self {
        Event {
            time,
            kind: EventKind::Perturb(p),
            label: String::new(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EventKind::Update(_) => "update",
            EventKind::Perturb(_) => "perturbation",
        }
    }

    fn details(&self) -> String {
        let body = match &self.kind {
            EventKind::Update(u) => format!("fields={}", u.fields().join("+")),
            EventKind::Perturb(p) => p.describe(),
        };
        if self.label.is_empty() {
            body
        } else {
            format!("{};{body}", self.label)
        }
    }
}

/// How the state at t = 0 is produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    /// Every variable zero.
    #[default]
    Rest,
    /// Phases uniform in [0, 2pi) from the schedule seed, everything else zero.
    RandomPhase,
    /// Amplitudes and offsets at target, phases on the coupling fixed point.
    Locked,
    Explicit(Vec<OscillatorState>),
}

impl InitialState {
    pub fn materialize(
        &self,
        params: &NetworkParams,
        rng: &mut SimRng,
    ) -> Result<Vec<OscillatorState>> {
        let n = params.n();
        match self {
            InitialState::Rest => Ok(vec![OscillatorState::default(); n]),
            InitialState::RandomPhase => Ok((0..n)
                .map(|_| OscillatorState::at_phase(rng.random_range(0.0..TAU)))
                .collect()),
            InitialState::Locked => Ok(locked_state(params)),
            InitialState::Explicit(states) => {
                if states.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "initial states".into(),
                        expected: n,
                        found: states.len(),
                    });
                }
                Ok(states.clone())
            }
        }
    }
}

/// State on the locked manifold of `params`.
///
/// Phases are propagated from oscillator 1 (phase 0) along every nonzero
/// coupling so that `phi_j - phi_i - varphi_ij = 0`. Inconsistent bias
/// cycles keep the first assignment; check the result with
/// [`crate::analysis::locking_error`].
pub fn locked_state(params: &NetworkParams) -> Vec<OscillatorState> {
    let n = params.n();
    let mut phase: Vec<Option<f64>> = vec![None; n];
    let mut queue = std::collections::VecDeque::new();
    for root in 0..n {
        if phase[root].is_some() {
            continue;
        }
        phase[root] = Some(0.0);
        queue.push_back(root);
        while let Some(k) = queue.pop_front() {
            let pk = phase[k].unwrap_or(0.0);
            for (m, slot) in phase.iter_mut().enumerate() {
                if slot.is_some() {
                    continue;
                }
                // k influences m: phi_m = phi_k - varphi_mk
                if params.w[(m, k)] != 0.0 {
                    *slot = Some(pk - params.varphi[(m, k)]);
                } else if params.w[(k, m)] != 0.0 {
                    *slot = Some(pk + params.varphi[(k, m)]);
                } else {
                    continue;
                }
                queue.push_back(m);
            }
        }
    }
    (0..n)
        .map(|i| OscillatorState {
            phi: phase[i].unwrap_or(0.0),
            r: params.big_r[i],
            r_dot: 0.0,
            x: params.big_x[i],
            x_dot: 0.0,
        })
        .collect()
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub duration: f64,
    pub dt: f64,
    pub integrator: Integrator,
    /// Parameters in force at t = 0, before any event.
    pub params: NetworkParams,
    pub initial: InitialState,
    pub seed: u64,
    pub events: Vec<Event>,
    /// Keep every k-th sample. `None` records every step, up to
    /// [`MAX_UNDECIMATED_SAMPLES`].
    pub decimation: Option<usize>,
}

impl Schedule {
    /// Starts from rest with zero target amplitude and switches to `preset`
    /// at t = 0, so the amplitude ramps in through its own dynamics.
    pub fn ramp_in(preset: &GaitPreset, omega: Vec<f64>, duration: f64, seed: u64) -> Self {
        let mut params = preset.params(omega);
        params.big_r = vec![0.0; params.n()];
        Schedule {
            duration,
            dt: DEFAULT_DT,
            integrator: Integrator::Euler,
            params,
            initial: InitialState::Rest,
            seed,
            events: vec![Event::preset(0.0, preset)],
            decimation: None,
        }
    }

    /// Parameters in force after every update event has been applied.
    pub fn final_params(&self) -> Result<NetworkParams> {
        self.events.iter().try_fold(self.params.clone(), |p, e| match &e.kind {
            EventKind::Update(u) => gaits::apply_update(&p, u),
            EventKind::Perturb(_) => Ok(p),
        })
    }

    pub fn steps(&self) -> usize {
        step_count(self.duration, self.dt)
    }

    pub fn sample_count(&self) -> usize {
        self.steps() / self.decimation.unwrap_or(1) + 1
    }

    /// Full check, including the memory limit on recorded samples.
    pub fn validate(&self) -> Result<()> {
        self.validate_dynamics()?;
        if self.decimation.is_none() && self.sample_count() > MAX_UNDECIMATED_SAMPLES {
            return Err(Error::InvalidSchedule(format!(
                "{} samples exceed the undecimated limit of {MAX_UNDECIMATED_SAMPLES}; set a decimation",
                self.sample_count()
            )));
        }
        Ok(())
    }

    /// Everything except the recording limit; enough to step the schedule.
    pub fn validate_dynamics(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.duration.is_finite() && self.dt <= self.duration) {
            return bad(format!(
                "duration = {} must be at least dt = {}",
                self.duration, self.dt
            ));
        }
        if self.decimation == Some(0) {
            return bad("decimation must be at least 1".into());
        }
        self.params.validate()?;
        let mut previous = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.time.is_finite() && e.time >= 0.0 && e.time < self.duration) {
                return bad(format!(
                    "event {} at t = {} lies outside [0, {})",
                    k + 1,
                    e.time,
                    self.duration
                ));
            }
            if e.time < previous {
                return bad(format!("event {} at t = {} is out of order", k + 1, e.time));
            }
            previous = e.time;
            if let EventKind::Perturb(p) = &e.kind {
                p.validate()?;
            }
        }
        Ok(())
    }
}

fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt - 1e-9).ceil() as usize
}

/// Index of the first step boundary at or after `time`.
pub fn boundary_index(time: f64, dt: f64) -> usize {
    (time / dt - 1e-9).ceil().max(0.0) as usize
}

/// Marker for an event as it was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMarker {
    /// Boundary time the event took effect, seconds.
    pub time: f64,
    pub kind: String,
    pub details: String,
}

/// Sampled simulation output, channel-major (`theta[i][k]` = oscillator i, sample k).
///
/// `theta`, `r` and `x` are in degrees, `phi` in radians. Rate channels are
/// empty for traces read back from CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub times: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub r_dot: Vec<Vec<f64>>,
    pub x_dot: Vec<Vec<f64>>,
    pub phi_dot: Vec<Vec<f64>>,
    pub markers: Vec<EventMarker>,
    /// State after the last step (not necessarily a recorded sample).
    pub final_states: Vec<OscillatorState>,
}

impl Trace {
    fn with_capacity(n: usize, samples: usize) -> Self {
        let cols = || vec![Vec::with_capacity(samples); n];
        Trace {
            times: Vec::with_capacity(samples),
            theta: cols(),
            phi: cols(),
            r: cols(),
            x: cols(),
            r_dot: cols(),
            x_dot: cols(),
            phi_dot: cols(),
            markers: Vec::new(),
            final_states: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, states: &[OscillatorState], params: &NetworkParams) -> Result<()> {
        let d = derivatives(states, params)?;
        self.times.push(t);
        for (i, s) in states.iter().enumerate() {
            self.theta[i].push(output_angle(s));
            self.phi[i].push(s.phi);
            self.r[i].push(s.r);
            self.x[i].push(s.x);
            self.r_dot[i].push(s.r_dot);
            self.x_dot[i].push(s.x_dot);
            self.phi_dot[i].push(d[i].phi_dot);
        }
        Ok(())
    }

    /// Recorded state of every oscillator at sample `k`.
    pub fn state_at(&self, k: usize) -> Vec<OscillatorState> {
        let rate = |c: &Vec<Vec<f64>>, i: usize| c.get(i).and_then(|v| v.get(k)).copied().unwrap_or(0.0);
        (0..self.n())
            .map(|i| OscillatorState {
                phi: self.phi[i][k],
                r: self.r[i][k],
                r_dot: rate(&self.r_dot, i),
                x: self.x[i][k],
                x_dot: rate(&self.x_dot, i),
            })
            .collect()
    }

    /// Index of the first sample with time at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t - 1e-9)
    }

    /// Output angles divided by the per-joint amplitude ceilings.
    pub fn normalized_theta(&self) -> Vec<Vec<f64>> {
        self.theta
            .iter()
            .zip(gaits::AMPLITUDE_CEILING_DEG.iter().chain(std::iter::repeat(&1.0)))
            .map(|(ch, &a)| ch.iter().map(|v| v / a).collect())
            .collect()
    }

    /// Samples at which a perturbation changed the state.
    fn perturbed_samples(&self) -> Vec<usize> {
        self.markers
            .iter()
            .filter(|m| m.kind == "perturbation")
            .map(|m| self.index_at(m.time))
            .collect()
    }

    /// Checks `|theta(k+1) - theta(k)| <= h * (|x_dot| + |r_dot| + |r| * |phi_dot|)`
    /// between consecutive samples, with the rates maximized over both
    /// endpoints. Pairs that straddle a perturbation are skipped.
    ///
    /// Returns the first violation as `(sample, oscillator, jump, bound)`.
    pub fn step_bound_violation(&self) -> Option<(usize, usize, f64, f64)> {
        let skip = self.perturbed_samples();
        for k in 0..self.len().saturating_sub(1) {
            if skip.contains(&(k + 1)) {
                continue;
            }
            let h = self.times[k + 1] - self.times[k];
            for i in 0..self.n() {
                let m = |c: &Vec<Vec<f64>>| c[i][k].abs().max(c[i][k + 1].abs());
                let bound = h * (m(&self.x_dot) + m(&self.r_dot) + m(&self.r) * m(&self.phi_dot));
                let jump = (self.theta[i][k + 1] - self.theta[i][k]).abs();
                if jump > bound * (1.0 + 1e-9) + 1e-12 {
                    return Some((k, i, jump, bound));
                }
            }
        }
        None
    }
}

/// Stepping engine shared by batch runs and the real-time stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: NetworkParams,
    states: Vec<OscillatorState>,
    integrator: Integrator,
    dt: f64,
    step: usize,
}

impl Simulation {
    pub fn new(
        params: NetworkParams,
        states: Vec<OscillatorState>,
        integrator: Integrator,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        if states.len() != params.n() {
            return Err(Error::DimensionMismatch {
                what: "initial states".into(),
                expected: params.n(),
                found: states.len(),
            });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSchedule(format!("dt = {dt} must be positive")));
        }
        Ok(Simulation {
            params,
            states,
            integrator,
            dt,
            step: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn states(&self) -> &[OscillatorState] {
        &self.states
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.states.iter().map(output_angle).collect()
    }

    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        self.states = self
            .integrator
            .step(&self.states, &self.params, self.dt)
            .map_err(|e| e.with_time(t))?;
        self.step += 1;
        Ok(())
    }

    pub fn apply_update(&mut self, update: &ParamUpdate) -> Result<()> {
        self.params = gaits::apply_update(&self.params, update)?;
        Ok(())
    }

    pub fn perturb(&mut self, p: &Perturbation, rng: &mut SimRng) -> Result<()> {
        self.states = inject_perturbation(&self.states, p, rng)?;
        Ok(())
    }
}

/// Steps a [`Simulation`] through a schedule, applying events at their boundaries.
pub struct Runner<'a> {
    schedule: &'a Schedule,
    sim: Simulation,
    rng: SimRng,
    next_event: usize,
}

impl<'a> Runner<'a> {
    pub fn new(schedule: &'a Schedule) -> Result<Self> {
        schedule.validate_dynamics()?;
        let mut rng = SimRng::seed_from_u64(schedule.seed);
        let initial = schedule.initial.materialize(&schedule.params, &mut rng)?;
        let sim = Simulation::new(
            schedule.params.clone(),
            initial,
            schedule.integrator,
            schedule.dt,
        )?;
        Ok(Runner {
            schedule,
            sim,
            rng,
            next_event: 0,
        })
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn total_steps(&self) -> usize {
        self.schedule.steps()
    }

    pub fn finished(&self) -> bool {
        self.sim.step_index() >= self.total_steps()
    }

    /// Applies every event bound to the current step boundary.
    pub fn apply_due_events(&mut self) -> Result<Vec<EventMarker>> {
        let k = self.sim.step_index();
        let mut markers = Vec::new();
        while let Some(event) = self
            .schedule
            .events
            .get(self.next_event)
            .filter(|e| boundary_index(e.time, self.schedule.dt) <= k)
        {
            match &event.kind {
                EventKind::Update(u) => self.sim.apply_update(u),
                EventKind::Perturb(p) => self.sim.perturb(p, &mut self.rng),
            }
            .map_err(|e| e.with_time(self.sim.time()))?;
            markers.push(EventMarker {
                time: self.sim.time(),
                kind: event.kind_name().to_string(),
                details: event.details(),
            });
            self.next_event += 1;
        }
        Ok(markers)
    }

    pub fn step(&mut self) -> Result<()> {
        self.sim.step()
    }
}

/// Runs a schedule to completion and records its trace.
pub fn run(schedule: &Schedule) -> Result<Trace> {
    schedule.validate()?;
    let mut runner = Runner::new(schedule)?;
    let every = schedule.decimation.unwrap_or(1);
    let mut trace = Trace::with_capacity(schedule.params.n(), schedule.sample_count());
    loop {
        let markers = runner.apply_due_events()?;
        trace.markers.extend(markers);
        let sim = runner.simulation();
        if sim.step_index() % every == 0 {
            trace.push(sim.time(), sim.states(), sim.params())?;
        }
        if runner.finished() {
            break;
        }
        runner.step()?;
    }
    trace.final_states = runner.simulation().states().to_vec();
    Ok(trace)
}

/// Runs independent schedules one after another.
pub fn run_batch_sequential(schedules: &[Schedule]) -> Vec<Result<Trace>> {
    schedules.iter().map(run).collect()
}

/// Runs independent schedules, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn run_batch(schedules: &[Schedule]) -> Vec<Result<Trace>> {
    use rayon::prelude::*;
    schedules.par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(schedules: &[Schedule]) -> Vec<Result<Trace>> {
    run_batch_sequential(schedules)
}

/// Natural frequency used by the canned demos, Hz.
pub const DEMO_FREQUENCY_HZ: f64 = 1.0;

/// Per-joint natural frequencies for the transitions demo, Hz.
///
/// The side joints are slightly detuned from the middle one, so each locked
/// pattern sits a little off the exact bias and a switch that reverses a
/// bias by pi does not start on the unstable equilibrium.
pub const TRANSITIONS_FREQUENCY_HZ: [f64; 3] = [1.0, 0.995, 1.005];

/// Event times of the transitions demo after the ramp-in, seconds.
pub const TRANSITION_TIMES: [f64; 2] = [12.0, 20.0];

/// Ramp into forward walking, then switch gaits at 12 s and 20 s; 30 s total.
pub fn transitions_demo() -> Schedule {
    transitions_demo_with(["forward", "rotate_cw", "backward"])
        .expect("bundled presets exist")
}

pub fn transitions_demo_with(gaits: [&str; 3]) -> Result<Schedule> {
    let first = gaits::preset(gaits[0])?;
    let omega = TRANSITIONS_FREQUENCY_HZ.iter().map(|f| f * TAU).collect();
    let mut schedule = Schedule::ramp_in(&first, omega, 30.0, 7);
    schedule.initial = InitialState::RandomPhase;
    for (time, name) in TRANSITION_TIMES.iter().zip(&gaits[1..]) {
        schedule.events.push(Event::preset(*time, &gaits::preset(name)?));
    }
    Ok(schedule)
}

/// Half-width of the recovery demo perturbation on phase (rad) and, converted
/// to degrees, on amplitude and offset.
pub const RECOVERY_HALF_WIDTH_RAD: f64 = 0.5;

pub fn recovery_perturbation() -> Perturbation {
    let deg = RECOVERY_HALF_WIDTH_RAD.to_degrees();
    Perturbation {
        phi: Range::symmetric(RECOVERY_HALF_WIDTH_RAD),
        r: Range::symmetric(deg),
        x: Range::symmetric(deg),
        ..Default::default()
    }
}

/// Forward gait started on its locked state, perturbed at 2 s, 8 s and 14 s.
pub fn recovery_demo() -> Schedule {
    let forward = gaits::preset("forward").expect("bundled presets exist");
    let params = forward.params(vec![DEMO_FREQUENCY_HZ * TAU; 3]);
    Schedule {
        duration: 20.0,
        dt: DEFAULT_DT,
        integrator: Integrator::Euler,
        params,
        initial: InitialState::Locked,
        seed: 11,
        events: [2.0, 8.0, 14.0]
            .into_iter()
            .map(|t| Event::perturb(t, recovery_perturbation()))
            .collect(),
        decimation: None,
    }
}

/// Fully connected network from random phases, 10 s.
pub fn sync_demo() -> Schedule {
    let sync = gaits::preset("sync_default").expect("bundled presets exist");
    let mut schedule = Schedule::ramp_in(&sync, vec![DEMO_FREQUENCY_HZ * TAU; 3], 10.0, 3);
    schedule.initial = InitialState::RandomPhase;
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{locking_error, wrap_phase};

    fn forward_locked() -> Schedule {
        let mut s = recovery_demo();
        s.events.clear();
        s
    }

    #[test]
    fn zero_amplitude_gives_zero_output() {
        let sync = gaits::preset("sync_default").unwrap();
        let mut params = sync.params(vec![1.0; 3]);
        params.big_r = vec![0.0; 3];
        let schedule = Schedule {
            duration: 1.0,
            dt: 0.01,
            integrator: Integrator::Euler,
            params,
            initial: InitialState::Rest,
            seed: 0,
            events: vec![],
            decimation: None,
        };
        let trace = run(&schedule).unwrap();
        assert_eq!(trace.len(), 101);
        assert!(trace.theta.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn events_bind_to_first_boundary_at_or_after_time() {
        assert_eq!(boundary_index(12.0, 0.01), 1200);
        assert_eq!(boundary_index(0.015, 0.01), 2);
        assert_eq!(boundary_index(0.0, 0.01), 0);
        let mut s = forward_locked();
        s.events.push(Event::update(0.015, ParamUpdate::default(), "noop"));
        let trace = run(&s).unwrap();
        assert!((trace.markers[0].time - 0.02).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        let mut s = forward_locked();
        s.dt = 0.0;
        assert!(s.validate().is_err());
        let mut s = forward_locked();
        s.events = vec![
            Event::perturb(3.0, Perturbation::default()),
            Event::perturb(1.0, Perturbation::default()),
        ];
        assert!(s.validate().unwrap_err().to_string().contains("out of order"));
        let mut s = forward_locked();
        s.events = vec![Event::perturb(20.0, Perturbation::default())];
        assert!(s.validate().is_err());
        let mut s = forward_locked();
        s.duration = 1001.0;
        assert!(s.validate().unwrap_err().to_string().contains("decimation"));
        s.decimation = Some(10);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn zero_ranges_leave_state_unchanged() {
        let states = locked_state(&gaits::preset("forward").unwrap().params(vec![1.0; 3]));
        let mut rng = SimRng::seed_from_u64(1);
        let out = inject_perturbation(&states, &Perturbation::default(), &mut rng).unwrap();
        assert_eq!(out, states);
    }

    #[test]
    fn perturbation_is_seed_deterministic_and_bounded() {
        let states = vec![OscillatorState::default(); 3];
        let p = Perturbation {
            phi: Range::symmetric(0.5),
            target: Target::Oscillator(1),
            ..Default::default()
        };
        let a = inject_perturbation(&states, &p, &mut SimRng::seed_from_u64(9)).unwrap();
        let b = inject_perturbation(&states, &p, &mut SimRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], states[0]);
        assert_eq!(a[2], states[2]);
        assert!(a[1].phi.abs() <= 0.5 && a[1].phi != 0.0);
        let out_of_range = Perturbation {
            target: Target::Oscillator(3),
            ..Default::default()
        };
        assert!(inject_perturbation(&states, &out_of_range, &mut SimRng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn locked_state_is_a_fixed_point() {
        for name in ["forward", "backward", "rotate_cw", "counter_phase_sides", "sync_default"] {
            let params = gaits::preset(name).unwrap().params(vec![2.0; 3]);
            let states = locked_state(&params);
            assert!(locking_error(&states, &params).unwrap().max_error < 1e-12, "{name}");
        }
        let forward = locked_state(&gaits::preset("forward").unwrap().params(vec![2.0; 3]));
        assert!((wrap_phase(forward[1].phi) + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((wrap_phase(forward[2].phi) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn decimation_keeps_every_kth_sample() {
        let full = run(&transitions_demo()).unwrap();
        let mut s = transitions_demo();
        s.decimation = Some(7);
        let thin = run(&s).unwrap();
        assert_eq!(thin.len(), (full.len() - 1) / 7 + 1);
        for (k, &t) in thin.times.iter().enumerate() {
            assert_eq!(t, full.times[7 * k]);
            for i in 0..3 {
                assert_eq!(thin.theta[i][k], full.theta[i][7 * k]);
                assert_eq!(thin.phi[i][k], full.phi[i][7 * k]);
            }
        }
        assert_eq!(thin.final_states, full.final_states);
    }

    #[test]
    fn event_splits_into_two_runs() {
        let full_schedule = transitions_demo();
        let full = run(&full_schedule).unwrap();
        let split = 12.0;
        let k_split = boundary_index(split, full_schedule.dt);

        let mut head = full_schedule.clone();
        head.duration = split;
        head.events.retain(|e| e.time < split);
        let head_trace = run(&head).unwrap();
        let mut params = head.params.clone();
        for e in &head.events {
            if let EventKind::Update(u) = &e.kind {
                params = gaits::apply_update(&params, u).unwrap();
            }
        }

        let mut tail = full_schedule.clone();
        tail.duration = full_schedule.duration - split;
        tail.params = params;
        tail.initial = InitialState::Explicit(head_trace.final_states.clone());
        tail.events = full_schedule
            .events
            .iter()
            .filter(|e| e.time >= split)
            .map(|e| Event {
                time: e.time - split,
                ..e.clone()
            })
            .collect();
        let tail_trace = run(&tail).unwrap();

        assert_eq!(head_trace.len(), k_split + 1);
        for k in 0..head_trace.len() {
            for i in 0..3 {
                assert_eq!(head_trace.theta[i][k], full.theta[i][k]);
            }
        }
        for k in 0..tail_trace.len() {
            for i in 0..3 {
                assert_eq!(tail_trace.theta[i][k], full.theta[i][k_split + k]);
                assert_eq!(tail_trace.phi[i][k], full.phi[i][k_split + k]);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run(&recovery_demo()).unwrap();
        let b = run(&recovery_demo()).unwrap();
        assert_eq!(a, b);
        let mut other = recovery_demo();
        other.seed += 1;
        assert_ne!(run(&other).unwrap().theta, a.theta);
    }

    #[test]
    fn batch_matches_sequential() {
        let schedules: Vec<Schedule> = (0..6)
            .map(|seed| {
                let mut s = sync_demo();
                s.seed = seed;
                s
            })
            .collect();
        let par = run_batch(&schedules);
        let seq = run_batch_sequential(&schedules);
        assert_eq!(par, seq);
    }

    #[test]
    fn divergence_is_annotated_with_time() {
        let mut s = forward_locked();
        s.params.a_r = 1e200;
        s.initial = InitialState::Rest;
        match run(&s) {
            Err(Error::Divergence { time: Some(t), .. }) => assert!(t >= 0.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
