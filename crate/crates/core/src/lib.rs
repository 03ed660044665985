//! Central pattern generator for a three-joint hexapod.
//!
//! A network of amplitude-controlled phase oscillators produces one joint
//! angle per oscillator. The crate covers the network equations and
//! integrators ([`network`]), gait presets ([`gaits`]), scheduled
//! experiments ([`sim`]), trace metrics ([`analysis`]) and the file formats
//! and commands behind the `cpg` binary ([`config`], [`trace_io`], [`cli`]).

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod gaits;
pub mod network;
pub mod sim;
pub mod trace_io;

pub use error::{Error, Result};
pub use gaits::{apply_update, preset, GaitPreset, GaitRegistry, ParamUpdate};
pub use network::{
    derivatives, euler_step, output_angle, rk4_step, Integrator, Matrix, NetworkParams,
    OscillatorState, StateDerivative,
};
pub use sim::{run, run_batch, Event, EventKind, InitialState, Perturbation, Schedule, Trace};
