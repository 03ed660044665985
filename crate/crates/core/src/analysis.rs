//! Trace metrics: phase wrapping, locking error, settling time and
//! reference comparison.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::{NetworkParams, OscillatorState};
use crate::sim::Trace;

/// Default lock tolerance on wrapped coupling arguments, radians.
pub const DEFAULT_PHASE_TOL: f64 = 1e-2;
/// Default tolerance on `|r - R|`: 0.01 rad expressed in degrees.
pub const DEFAULT_AMPLITUDE_TOL_DEG: f64 = 0.01 * 180.0 / PI;

/// Representative of `a` in (-pi, pi].
pub fn wrap_phase(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Largest wrapped difference between any two phases.
pub fn phase_spread(phases: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (k, &a) in phases.iter().enumerate() {
        for &b in &phases[k + 1..] {
            worst = worst.max(wrap_phase(b - a).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockReport {
    /// `((i, j), wrap(phi_j - phi_i - varphi_ij))` for every nonzero `w_ij`, zero-based.
    pub errors: Vec<((usize, usize), f64)>,
    pub max_error: f64,
    pub tolerance: f64,
    pub locked: bool,
}

pub fn locking_error(states: &[OscillatorState], params: &NetworkParams) -> Result<LockReport> {
    locking_error_with(states, params, DEFAULT_PHASE_TOL)
}

pub fn locking_error_with(
    states: &[OscillatorState],
    params: &NetworkParams,
    tolerance: f64,
) -> Result<LockReport> {
    let phases: Vec<f64> = states.iter().map(|s| s.phi).collect();
    lock_report(&phases, params, tolerance)
}

fn lock_report(phases: &[f64], params: &NetworkParams, tolerance: f64) -> Result<LockReport> {
    if phases.len() != params.n() || params.w.n() != params.n() || params.varphi.n() != params.n() {
        return Err(Error::DimensionMismatch {
            what: "locking error inputs".into(),
            expected: params.n(),
            found: phases.len(),
        });
    }
    let errors: Vec<_> = params
        .w
        .iter()
        .filter(|&(_, w)| w != 0.0)
        .map(|((i, j), _)| ((i, j), wrap_phase(phases[j] - phases[i] - params.varphi[(i, j)])))
        .collect();
    let max_error = errors.iter().map(|(_, e)| e.abs()).fold(0.0, f64::max);
    Ok(LockReport {
        errors,
        max_error,
        tolerance,
        locked: max_error < tolerance,
    })
}

/// Tolerances for [`settling_time`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleTolerance {
    /// On wrapped coupling arguments, radians.
    pub phase: f64,
    /// On `|r - R|`, degrees.
    pub amplitude: f64,
}

impl Default for SettleTolerance {
    fn default() -> Self {
        SettleTolerance {
            phase: DEFAULT_PHASE_TOL,
            amplitude: DEFAULT_AMPLITUDE_TOL_DEG,
        }
    }
}

impl SettleTolerance {
    pub fn uniform(tol: f64) -> Self {
        SettleTolerance {
            phase: tol,
            amplitude: tol,
        }
    }
}

/// Earliest sample time from which `holds(k)` is true for every later sample.
pub fn settle_time_by(times: &[f64], holds: impl Fn(usize) -> bool) -> Option<f64> {
    let mut first = None;
    for k in (0..times.len()).rev() {
        if holds(k) {
            first = Some(k);
        } else {
            break;
        }
    }
    first.map(|k| times[k])
}

/// Time after which locking error and every `|r_i - R_i|` stay below tolerance.
pub fn settling_time(trace: &Trace, params: &NetworkParams, tol: SettleTolerance) -> Option<f64> {
    if trace.n() != params.n() {
        return None;
    }
    settle_time_by(&trace.times, |k| {
        let phases: Vec<f64> = trace.phi.iter().map(|c| c[k]).collect();
        let locked = lock_report(&phases, params, tol.phase)
            .map(|rep| rep.max_error < tol.phase)
            .unwrap_or(false);
        locked
            && trace
                .r
                .iter()
                .zip(&params.big_r)
                .all(|(c, target)| (c[k] - target).abs() < tol.amplitude)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Align {
    None,
    /// Shift by the best whole number of samples within `max_shift` seconds.
    Phase { max_shift: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    /// Max `|theta - theta_ref|` per oscillator over the overlap.
    pub per_channel: Vec<f64>,
    /// Applied time shift, seconds (trace sample k compared with reference k - shift/dt).
    pub shift: f64,
}

impl Deviation {
    pub fn max(&self) -> f64 {
        self.per_channel.iter().copied().fold(0.0, f64::max)
    }
}

fn max_deviation(a: &[Vec<f64>], b: &[Vec<f64>], shift: isize) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(ca, cb)| {
            let len = ca.len().min(cb.len()) as isize;
            let (start, end) = (shift.max(0), (len + shift).min(len));
            (start..end)
                .map(|k| (ca[k as usize] - cb[(k - shift) as usize]).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Per-channel max output deviation of `trace` from `reference`.
pub fn compare_to_reference(trace: &Trace, reference: &Trace, align: Align) -> Result<Deviation> {
    if trace.n() != reference.n() {
        return Err(Error::DimensionMismatch {
            what: "trace channels".into(),
            expected: reference.n(),
            found: trace.n(),
        });
    }
    match align {
        Align::None => Ok(Deviation {
            per_channel: max_deviation(&trace.theta, &reference.theta, 0),
            shift: 0.0,
        }),
        Align::Phase { max_shift } => {
            let dt = match trace.times.as_slice() {
                [a, b, ..] => b - a,
                _ => return Err(Error::InvalidSchedule("trace needs at least two samples".into())),
            };
            let limit = (max_shift / dt).round() as isize;
            let (shift, per_channel) = (-limit..=limit)
                .map(|s| (s, max_deviation(&trace.theta, &reference.theta, s)))
                .min_by(|(_, a), (_, b)| {
                    let worst = |v: &Vec<f64>| v.iter().copied().fold(0.0, f64::max);
                    worst(a).total_cmp(&worst(b))
                })
                .expect("shift range is never empty");
            Ok(Deviation {
                per_channel,
                shift: shift as f64 * dt,
            })
        }
    }
}

/// `key=value` lines summarizing a trace against the parameters in force at its end.
pub fn report(trace: &Trace, params: &NetworkParams, tol: SettleTolerance) -> Result<String> {
    let mut out = String::new();
    let last = trace
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidSchedule("empty trace".into()))?;
    let phases: Vec<f64> = trace.phi.iter().map(|c| c[last]).collect();
    let lock = lock_report(&phases, params, tol.phase)?;
    let _ = writeln!(out, "samples={}", trace.len());
    let _ = writeln!(out, "final_time_s={:.6}", trace.times[last]);
    match settling_time(trace, params, tol) {
        Some(t) => {
            let _ = writeln!(out, "settling_time_s={t:.6}");
        }
        None => {
            let _ = writeln!(out, "settling_time_s=none");
        }
    }
    let _ = writeln!(out, "final_lock_error_rad={:.6e}", lock.max_error);
    let _ = writeln!(out, "locked={}", lock.locked);
    let _ = writeln!(out, "final_phase_spread_rad={:.6e}", phase_spread(&phases));
    for (i, ch) in trace.theta.iter().enumerate() {
        let peak = ch.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let _ = writeln!(out, "theta_{}_peak_deg={peak:.6}", i + 1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaits::preset;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(3.0 * FRAC_PI_2) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_phase(-PI), PI);
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(7.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn sync_all_equal_is_locked() {
        let params = preset("sync_default").unwrap().params(vec![1.0; 3]);
        let states = vec![OscillatorState::at_phase(2.5); 3];
        let rep = locking_error(&states, &params).unwrap();
        assert_eq!(rep.max_error, 0.0);
        assert!(rep.locked);
        assert_eq!(rep.errors.len(), 6);
    }

    #[test]
    fn forward_fixed_point_and_displacement() {
        let params = preset("forward").unwrap().params(vec![1.0; 3]);
        let mut states = vec![
            OscillatorState::at_phase(0.0),
            OscillatorState::at_phase(-FRAC_PI_2),
            OscillatorState::at_phase(FRAC_PI_2),
        ];
        let rep = locking_error(&states, &params).unwrap();
        assert_eq!(rep.errors.len(), 2);
        assert!(rep.max_error < 1e-15);
        states[1].phi += 0.3;
        let rep = locking_error(&states, &params).unwrap();
        assert!((rep.max_error - 0.3).abs() < 1e-12);
        assert!(!rep.locked);
    }

    #[test]
    fn constant_locked_trace_settles_at_zero() {
        let params = preset("sync_default").unwrap().params(vec![1.0; 3]);
        let trace = Trace {
            times: vec![0.0, 0.5, 1.0],
            theta: vec![vec![0.0; 3]; 3],
            phi: vec![vec![1.0; 3]; 3],
            r: vec![vec![12.0; 3], vec![40.0; 3], vec![40.0; 3]],
            x: vec![vec![0.0; 3]; 3],
            ..Default::default()
        };
        assert_eq!(settling_time(&trace, &params, SettleTolerance::default()), Some(0.0));
    }

    #[test]
    fn settle_by_requires_suffix() {
        let times = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(settle_time_by(&times, |k| k != 1), Some(2.0));
        assert_eq!(settle_time_by(&times, |k| k != 3), None);
        assert_eq!(settle_time_by(&times, |_| true), Some(0.0));
    }

    fn sine_trace(offset: f64, dt: f64, len: usize) -> Trace {
        let times: Vec<f64> = (0..len).map(|k| k as f64 * dt).collect();
        Trace {
            theta: vec![times.iter().map(|t| (t - offset).sin()).collect()],
            times,
            ..Default::default()
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = sine_trace(0.0, 0.01, 500);
        let d = compare_to_reference(&a, &a, Align::Phase { max_shift: 1.0 }).unwrap();
        assert_eq!(d.max(), 0.0);
        assert_eq!(d.shift, 0.0);
    }

    #[test]
    fn phase_alignment_recovers_shift() {
        let reference = sine_trace(0.0, 0.01, 2000);
        let shifted = sine_trace(0.3, 0.01, 2000);
        let raw = compare_to_reference(&shifted, &reference, Align::None).unwrap();
        assert!(raw.max() > 0.2);
        let aligned =
            compare_to_reference(&shifted, &reference, Align::Phase { max_shift: TAU }).unwrap();
        assert!(aligned.max() < 1e-3, "{aligned:?}");
        assert!((aligned.shift - 0.3).abs() < 1e-9);
    }
}
