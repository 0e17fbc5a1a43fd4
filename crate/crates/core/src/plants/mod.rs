//! Simulation plants: the 6-DOF quadrotor and the planar serial chain.

pub mod chain;
pub mod quadrotor;
