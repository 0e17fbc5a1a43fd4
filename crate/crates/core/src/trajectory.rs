//! Reference generators: a figure-eight loop for the quadrotor, phase-shifted
//! joint sinusoids for the chain, and constant holds. All kinds produce
//! C2-continuous references with analytic first and second derivatives; a
//! quintic ramp takes the oscillatory part smoothly out of the start point.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Gerono figure-eight centered on `(0, 0, z0)`:
    /// `p = (A sin wt, B sin 2wt, z0 + C sin wt)` with the deviation ramped.
    Lemniscate3d {
        amp_x: f64,
        amp_y: f64,
        amp_z: f64,
        z0: f64,
        /// Time for one of the two loops; the full figure takes twice this.
        loop_duration: f64,
        ramp: f64,
        #[serde(default)]
        yaw: f64,
        #[serde(default)]
        yaw_rate: f64,
    },
    /// Per-joint `q_i = a_i sin(2 pi t / T + phi_i)`, ramped from zero.
    JointSinusoid {
        amplitudes: Vec<f64>,
        period: f64,
        phases: Vec<f64>,
        ramp: f64,
    },
    /// Constant reference with zero derivatives.
    Hold { position: Vec<f64> },
}

/// One reference sample: position-level reference with two derivatives, plus
/// the yaw profile for plants that use it.
#[derive(Debug, Clone, PartialEq)]
pub struct RefSample {
    pub pos: DVector<f64>,
    pub vel: DVector<f64>,
    pub acc: DVector<f64>,
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl TrajectorySpec {
    pub fn dim(&self) -> usize {
        match self {
            TrajectorySpec::Lemniscate3d { .. } => 3,
            TrajectorySpec::JointSinusoid { amplitudes, .. } => amplitudes.len(),
            TrajectorySpec::Hold { position } => position.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrajectorySpec::Lemniscate3d {
                loop_duration,
                ramp,
                ..
            } => {
                if *loop_duration <= 0.0 {
                    return Err(CoreError::Config("loop_duration must be positive".into()));
                }
                if *ramp < 0.0 {
                    return Err(CoreError::Config("ramp cannot be negative".into()));
                }
            }
            TrajectorySpec::JointSinusoid {
                amplitudes,
                period,
                phases,
                ramp,
            } => {
                if *period <= 0.0 {
                    return Err(CoreError::Config("period must be positive".into()));
                }
                if *ramp < 0.0 {
                    return Err(CoreError::Config("ramp cannot be negative".into()));
                }
                if phases.len() != amplitudes.len() {
                    return Err(CoreError::Config(format!(
                        "phases has {} entries, amplitudes {}",
                        phases.len(),
                        amplitudes.len()
                    )));
                }
            }
            TrajectorySpec::Hold { position } => {
                if position.is_empty() {
                    return Err(CoreError::Config("hold position is empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Samples the reference at `t >= 0`.
    pub fn sample(&self, t: f64) -> RefSample {
        match self {
            TrajectorySpec::Hold { position } => RefSample {
                pos: DVector::from_row_slice(position),
                vel: DVector::zeros(position.len()),
                acc: DVector::zeros(position.len()),
                yaw: 0.0,
                yaw_rate: 0.0,
            },
            TrajectorySpec::JointSinusoid {
                amplitudes,
                period,
                phases,
                ramp,
            } => {
                let n = amplitudes.len();
                let (r, dr, ddr) = quintic_ramp(t, *ramp);
                let omega = 2.0 * std::f64::consts::PI / period;
                let mut pos = DVector::zeros(n);
                let mut vel = DVector::zeros(n);
                let mut acc = DVector::zeros(n);
                for i in 0..n {
                    let arg = omega * t + phases[i];
                    let f = amplitudes[i] * arg.sin();
                    let df = amplitudes[i] * omega * arg.cos();
                    let ddf = -amplitudes[i] * omega * omega * arg.sin();
                    pos[i] = r * f;
                    vel[i] = dr * f + r * df;
                    acc[i] = ddr * f + 2.0 * dr * df + r * ddf;
                }
                RefSample {
                    pos,
                    vel,
                    acc,
                    yaw: 0.0,
                    yaw_rate: 0.0,
                }
            }
            TrajectorySpec::Lemniscate3d {
                amp_x,
                amp_y,
                amp_z,
                z0,
                loop_duration,
                ramp,
                yaw,
                yaw_rate,
            } => {
                // One loop is half the Gerono period.
                let omega = std::f64::consts::PI / loop_duration;
                let (r, dr, ddr) = quintic_ramp(t, *ramp);
                let mut pos = DVector::zeros(3);
                let mut vel = DVector::zeros(3);
                let mut acc = DVector::zeros(3);
                let comps = [
                    (*amp_x, omega),
                    (*amp_y, 2.0 * omega),
                    (*amp_z, omega),
                ];
                for (i, (a, w)) in comps.iter().enumerate() {
                    let f = a * (w * t).sin();
                    let df = a * w * (w * t).cos();
                    let ddf = -a * w * w * (w * t).sin();
                    pos[i] = r * f;
                    vel[i] = dr * f + r * df;
                    acc[i] = ddr * f + 2.0 * dr * df + r * ddf;
                }
                pos[2] += z0;
                RefSample {
                    pos,
                    vel,
                    acc,
                    yaw: yaw + yaw_rate * t,
                    yaw_rate: *yaw_rate,
                }
            }
        }
    }
}

/// Quintic smoothstep and its two derivatives: 0 at t=0, 1 after `ramp`,
/// with zero first and second derivatives at both ends.
fn quintic_ramp(t: f64, ramp: f64) -> (f64, f64, f64) {
    if ramp <= 0.0 || t >= ramp {
        return (1.0, 0.0, 0.0);
    }
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = t / ramp;
    let r = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let dr = 30.0 * u * u * (1.0 - u) * (1.0 - u) / ramp;
    let ddr = 60.0 * u * (1.0 - 3.0 * u + 2.0 * u * u) / (ramp * ramp);
    (r, dr, ddr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lemniscate() -> TrajectorySpec {
        TrajectorySpec::Lemniscate3d {
            amp_x: 1.0,
            amp_y: 0.5,
            amp_z: 0.0,
            z0: 1.0,
            loop_duration: 35.0,
            ramp: 3.0,
            yaw: 0.0,
            yaw_rate: 0.0,
        }
    }

    #[test]
    fn hold_is_constant() {
        let spec = TrajectorySpec::Hold {
            position: vec![0.3, -0.1],
        };
        for t in [0.0, 1.0, 100.0] {
            let s = spec.sample(t);
            assert_eq!(s.pos[0], 0.3);
            assert_eq!(s.vel.norm(), 0.0);
            assert_eq!(s.acc.norm(), 0.0);
        }
    }

    #[test]
    fn lemniscate_starts_at_loop_center() {
        let s = lemniscate().sample(0.0);
        assert_eq!(s.pos[0], 0.0);
        assert_eq!(s.pos[1], 0.0);
        assert_eq!(s.pos[2], 1.0);
        assert_eq!(s.vel.norm(), 0.0);
        assert_eq!(s.acc.norm(), 0.0);
    }

    #[test]
    fn ramp_gives_smooth_start() {
        let spec = TrajectorySpec::JointSinusoid {
            amplitudes: vec![0.4, 0.3],
            period: 1.0,
            phases: vec![0.0, 1.0],
            ramp: 1.5,
        };
        let s = spec.sample(0.0);
        assert_eq!(s.pos.norm(), 0.0);
        assert_eq!(s.vel.norm(), 0.0);
        assert_eq!(s.acc.norm(), 0.0);
    }

    fn check_derivatives(spec: &TrajectorySpec, t: f64) {
        let h = 1e-5;
        let sm = spec.sample(t - h);
        let sp = spec.sample(t + h);
        let s = spec.sample(t);
        let vel_fd = (&sp.pos - &sm.pos) / (2.0 * h);
        let acc_fd = (&sp.vel - &sm.vel) / (2.0 * h);
        assert!(
            (&s.vel - &vel_fd).norm() < 1e-6,
            "velocity mismatch at t={t}: {} vs fd {}",
            s.vel,
            vel_fd
        );
        assert!((&s.acc - &acc_fd).norm() < 1e-6, "acceleration mismatch at t={t}");
    }

    #[test]
    fn derivative_consistency_spot_checks() {
        let lem = lemniscate();
        let sin = TrajectorySpec::JointSinusoid {
            amplitudes: vec![0.4, 0.3],
            period: 1.0,
            phases: vec![0.0, std::f64::consts::FRAC_PI_2],
            ramp: 1.0,
        };
        for t in [0.01, 0.5, 0.999, 1.001, 2.3, 17.0, 42.5] {
            check_derivatives(&lem, t);
            check_derivatives(&sin, t);
        }
    }

    #[test]
    fn references_bounded_over_period() {
        let spec = lemniscate();
        let mut sup_pos = 0.0f64;
        let mut sup_vel = 0.0f64;
        let mut sup_acc = 0.0f64;
        for k in 0..7000 {
            let s = spec.sample(k as f64 * 0.01);
            sup_pos = sup_pos.max(s.pos.norm());
            sup_vel = sup_vel.max(s.vel.norm());
            sup_acc = sup_acc.max(s.acc.norm());
        }
        assert!(sup_pos.is_finite() && sup_vel.is_finite() && sup_acc.is_finite());
        assert!(sup_pos < 2.5 && sup_vel < 1.0 && sup_acc < 1.0);
    }

    proptest! {
        #[test]
        fn analytic_derivatives_match_finite_differences(t in 0.001f64..80.0) {
            check_derivatives(&lemniscate(), t);
        }
    }
}
