//! Oscillator network state, right-hand side and fixed-step integrators.
//!
//! Each oscillator carries a phase `phi` (radians, unwrapped) and two
//! critically damped second-order channels: amplitude `r` and offset `x`.
//! Amplitude and offset are servo angles and are kept in degrees, the unit
//! the joint targets are specified in; phases and phase biases are radians.
//!
//! ```text
//! phi_dot_i = omega_i + sum_j w_ij * r_j * sin(phi_j - phi_i - varphi_ij)
//! r_ddot_i  = a_r * (a_r / 4 * (R_i - r_i) - r_dot_i)
//! x_ddot_i  = a_x * (a_x / 4 * (X_i - x_i) - x_dot_i)
//! theta_i   = x_i + r_i * sin(phi_i)
//! ```

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense square matrix, row `i` = influenced oscillator, column `j` = influencer.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// All off-diagonal entries set to `value`, zero diagonal.
    pub fn off_diagonal(n: usize, value: f64) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[(i, j)] = value;
                }
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: format!("matrix row {}", i + 1),
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, &v)| ((k / n, k % n), v))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Dynamical state of one oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillatorState {
    /// Phase in radians, unwrapped.
    pub phi: f64,
    /// Amplitude, degrees.
    pub r: f64,
    /// Amplitude rate, degrees/s.
    pub r_dot: f64,
    /// Offset, degrees.
    pub x: f64,
    /// Offset rate, degrees/s.
    pub x_dot: f64,
}

impl OscillatorState {
    pub fn at_phase(phi: f64) -> Self {
        OscillatorState {
            phi,
            ..Default::default()
        }
    }

    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("phi", self.phi),
            ("r", self.r),
            ("r_dot", self.r_dot),
            ("x", self.x),
            ("x_dot", self.x_dot),
        ]
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        self.fields()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(name, _)| name)
    }

    /// `self + h * rate`, where `rate` holds the time derivative of each field.
    fn advanced(&self, rate: &OscillatorState, h: f64) -> OscillatorState {
        OscillatorState {
            phi: self.phi + h * rate.phi,
            r: self.r + h * rate.r,
            r_dot: self.r_dot + h * rate.r_dot,
            x: self.x + h * rate.x,
            x_dot: self.x_dot + h * rate.x_dot,
        }
    }
}

impl fmt::Display for OscillatorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "phi={:.6} r={:.6} r_dot={:.6} x={:.6} x_dot={:.6}",
            self.phi, self.r, self.r_dot, self.x, self.x_dot
        )
    }
}

/// Time derivatives not already carried in [`OscillatorState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub phi_dot: f64,
    pub r_ddot: f64,
    pub x_ddot: f64,
}

/// Control inputs and coupling of an `n`-oscillator network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Natural frequency per oscillator, rad/s.
    pub omega: Vec<f64>,
    /// Target amplitude per oscillator, degrees.
    pub big_r: Vec<f64>,
    /// Target offset per oscillator, degrees.
    pub big_x: Vec<f64>,
    /// Amplitude gain, 1/s.
    pub a_r: f64,
    /// Offset gain, 1/s.
    pub a_x: f64,
    /// Coupling weights, 1/s.
    pub w: Matrix,
    /// Phase biases, radians.
    pub varphi: Matrix,
}

/// Gain used for both amplitude and offset channels on the hexapod.
pub const DEFAULT_GAIN: f64 = 2.0;
/// Coupling weight used by every bundled gait.
pub const DEFAULT_COUPLING: f64 = 0.5;
/// Euler step used on the robot controller, seconds.
pub const DEFAULT_DT: f64 = 0.01;

impl NetworkParams {
    /// Uncoupled network with equal natural frequencies and zero targets.
    pub fn uncoupled(n: usize, omega: f64) -> Self {
        NetworkParams {
            omega: vec![omega; n],
            big_r: vec![0.0; n],
            big_x: vec![0.0; n],
            a_r: DEFAULT_GAIN,
            a_x: DEFAULT_GAIN,
            w: Matrix::zeros(n),
            varphi: Matrix::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidParams("network needs at least one oscillator".into()));
        }
        for (what, v) in [("big_r", &self.big_r), ("big_x", &self.big_x)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for (what, m) in [("w", &self.w), ("varphi", &self.varphi)] {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected: n,
                    found: m.n(),
                });
            }
        }
        for (what, v) in [("omega", &self.omega), ("big_r", &self.big_r), ("big_x", &self.big_x)] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!("{what}[{}] is not finite", i + 1)));
            }
        }
        if let Some(i) = self.big_r.iter().position(|&r| r < 0.0) {
            return Err(Error::InvalidParams(format!(
                "big_r[{}] = {} must be non-negative",
                i + 1,
                self.big_r[i]
            )));
        }
        for (what, g) in [("a_r", self.a_r), ("a_x", self.a_x)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParams(format!("{what} = {g} must be positive")));
            }
        }
        for (what, m) in [("w", &self.w), ("varphi", &self.varphi)] {
            if let Some(((i, j), v)) = m.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{what}[{}][{}] = {v} is not finite",
                    i + 1,
                    j + 1
                )));
            }
        }
        for i in 0..n {
            if self.w[(i, i)] != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "w[{}][{}] = {}: self-coupling must be zero",
                    i + 1,
                    i + 1,
                    self.w[(i, i)]
                )));
            }
        }
        Ok(())
    }
}

fn check_states(states: &[OscillatorState], params: &NetworkParams) -> Result<()> {
    if states.len() != params.n() {
        return Err(Error::DimensionMismatch {
            what: "oscillator states".into(),
            expected: params.n(),
            found: states.len(),
        });
    }
    if let Some((i, var)) = states
        .iter()
        .enumerate()
        .find_map(|(i, s)| s.first_non_finite().map(|v| (i, v)))
    {
        return Err(Error::NonFinite(format!("state of oscillator {} field `{var}`", i + 1)));
    }
    Ok(())
}

fn derivative_of(i: usize, states: &[OscillatorState], params: &NetworkParams) -> StateDerivative {
    let s = &states[i];
    let coupling: f64 = (0..states.len())
        .map(|j| {
            let w = params.w[(i, j)];
            if w == 0.0 {
                0.0
            } else {
                w * states[j].r * (states[j].phi - s.phi - params.varphi[(i, j)]).sin()
            }
        })
        .sum();
    let (a_r, a_x) = (params.a_r, params.a_x);
    StateDerivative {
        phi_dot: params.omega[i] + coupling,
        r_ddot: a_r * (a_r / 4.0 * (params.big_r[i] - s.r) - s.r_dot),
        x_ddot: a_x * (a_x / 4.0 * (params.big_x[i] - s.x) - s.x_dot),
    }
}

fn derivatives_unchecked(states: &[OscillatorState], params: &NetworkParams) -> Vec<StateDerivative> {
    (0..states.len()).map(|i| derivative_of(i, states, params)).collect()
}

/// Right-hand side of the network equations. Pure; does not touch `states`.
pub fn derivatives(
    states: &[OscillatorState],
    params: &NetworkParams,
) -> Result<Vec<StateDerivative>> {
    check_states(states, params)?;
    Ok(derivatives_unchecked(states, params))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("time step {dt} must be positive")))
    }
}

fn ensure_finite(states: Vec<OscillatorState>) -> Result<Vec<OscillatorState>> {
    for (i, s) in states.iter().enumerate() {
        if let Some(variable) = s.first_non_finite() {
            return Err(Error::Divergence {
                oscillator: i + 1,
                variable,
                time: None,
            });
        }
    }
    Ok(states)
}

/// One explicit Euler step with the robot controller's update order.
///
/// All derivatives are taken from the old state before anything is
/// committed, and `r`/`x` advance with the *old* rates.
pub fn euler_step(
    states: &[OscillatorState],
    params: &NetworkParams,
    dt: f64,
) -> Result<Vec<OscillatorState>> {
    check_dt(dt)?;
    check_states(states, params)?;
    let next = states
        .iter()
        .zip(derivatives_unchecked(states, params))
        .map(|(s, d)| OscillatorState {
            phi: s.phi + dt * d.phi_dot,
            r_dot: s.r_dot + dt * d.r_ddot,
            r: s.r + dt * s.r_dot,
            x_dot: s.x_dot + dt * d.x_ddot,
            x: s.x + dt * s.x_dot,
        })
        .collect();
    ensure_finite(next)
}

/// Rate of every state field, packed in an `OscillatorState`.
fn rates(states: &[OscillatorState], params: &NetworkParams) -> Vec<OscillatorState> {
    states
        .iter()
        .zip(derivatives_unchecked(states, params))
        .map(|(s, d)| OscillatorState {
            phi: d.phi_dot,
            r: s.r_dot,
            r_dot: d.r_ddot,
            x: s.x_dot,
            x_dot: d.x_ddot,
        })
        .collect()
}

fn advance(states: &[OscillatorState], rate: &[OscillatorState], h: f64) -> Vec<OscillatorState> {
    states.iter().zip(rate).map(|(s, k)| s.advanced(k, h)).collect()
}

/// Classical fourth-order Runge-Kutta step on the same right-hand side.
pub fn rk4_step(
    states: &[OscillatorState],
    params: &NetworkParams,
    dt: f64,
) -> Result<Vec<OscillatorState>> {
    check_dt(dt)?;
    check_states(states, params)?;
    let k1 = rates(states, params);
    let k2 = rates(&advance(states, &k1, dt / 2.0), params);
    let k3 = rates(&advance(states, &k2, dt / 2.0), params);
    let k4 = rates(&advance(states, &k3, dt), params);
    let next = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let combo = |f: fn(&OscillatorState) -> f64| {
                (f(&k1[i]) + 2.0 * f(&k2[i]) + 2.0 * f(&k3[i]) + f(&k4[i])) / 6.0
            };
            let mean = OscillatorState {
                phi: combo(|k| k.phi),
                r: combo(|k| k.r),
                r_dot: combo(|k| k.r_dot),
                x: combo(|k| k.x),
                x_dot: combo(|k| k.x_dot),
            };
            s.advanced(&mean, dt)
        })
        .collect();
    ensure_finite(next)
}

/// Joint angle commanded by one oscillator, degrees.
pub fn output_angle(state: &OscillatorState) -> f64 {
    state.x + state.r * state.phi.sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

impl Integrator {
    pub fn step(
        self,
        states: &[OscillatorState],
        params: &NetworkParams,
        dt: f64,
    ) -> Result<Vec<OscillatorState>> {
        match self {
            Integrator::Euler => euler_step(states, params, dt),
            Integrator::Rk4 => rk4_step(states, params, dt),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        })
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::Parse(format!(
                "unknown integrator `{other}` (expected euler or rk4)"
            ))),
        }
    }
}
