//! Symplectic integrators for highly oscillatory Hamiltonian systems built
//! from approximate Hamilton-Jacobi generating functions, together with
//! benchmark systems, multiple-time-stepping baselines and an experiment
//! harness.

pub mod baselines;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fixedpoint;
pub mod hj_matrix;
pub mod hj_pendulum;
pub mod hj_scalar;
pub mod phase;
pub mod record;
pub mod simulation;
pub mod systems;
pub mod verify;

pub use config::IntegratorConfig;
pub use error::{Error, Result};
pub use phase::SlowFastState;
pub use record::{RunOptions, RunRecord};
