//! Lyapunov-tamed Euler scheme for SDEs whose drift explodes on the boundary
//! of an open domain.
//!
//! * [`sde`]: problem abstraction, tamed drift, Euler kernel, coupled noise.
//! * [`particles`]: singular repulsive particles on the line.
//! * [`analysis`]: numerical checks of the Lyapunov-type assumptions.
//! * [`harness`]: coupled Monte Carlo strong-error estimation and rate fits.
//! * [`config`] and [`cli`]: the config-driven experiment runner.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod particles;
pub mod sde;

pub use error::{Error, Result};
pub use particles::{build_problem, min_gap, Confinement, GapSummary, ParticleSystem, ParticleSystemSpec};
pub use sde::{
    coarsen_noise, euler_step, simulate_path, tamed_drift, LyapunovKind, NoisePath, NoiseSource, SdeModel, SdeProblem,
    TamingPolicy, TrajectoryRecord,
};
