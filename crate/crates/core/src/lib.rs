//! Simulation library and benchmark harness for the artificial-time-delay
//! controller family: classical time-delayed control (TDC), the scalar
//! adaptive baseline (ATDE) and the adaptive-robust variant (ARTDE) whose
//! switching gain tracks a state-dependent uncertainty bound.
//!
//! The crate provides:
//!
//! - [`linalg`]: Lyapunov solve, companion matrices, rotation kinematics;
//! - [`tde`]: the delayed input/acceleration history and lumped-uncertainty
//!   estimation;
//! - [`controller`]: the three control laws and their adaptive machinery;
//! - [`plants`]: a 6-DOF quadrotor with position/attitude co-design and a
//!   planar n-link chain with state-dependent disturbances;
//! - [`trajectory`]: smooth reference generators;
//! - [`sim`]: the fixed-step closed-loop executor with trace recording;
//! - [`metrics`]: RMS/peak comparison statistics and report emission;
//! - [`presets`]: ready-made benchmark scenarios.

pub mod controller;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod plants;
pub mod presets;
pub mod sim;
pub mod tde;
pub mod trajectory;

pub use error::{CoreError, Result};
