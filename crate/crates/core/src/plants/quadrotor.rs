//! 6-DOF quadrotor plant: position and attitude dynamics plus the co-design
//! glue (thrust extraction, desired attitude, rotation-based attitude error).
//!
//! The attitude inertia can run in two modes: a simplified constant diagonal
//! `J` with no Coriolis coupling, or the full Euler-angle model where `J(q) =
//! W(q)' J_body W(q)` and the Coriolis matrix follows from the Christoffel
//! symbols of that map. The controllers treat both as unknown.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{euler_to_rotation, vee, RotationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttitudeModel {
    /// Constant diagonal inertia, zero Coriolis matrix.
    Simplified,
    /// Configuration-dependent inertia from the Euler-angle kinematics.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrotorParams {
    /// Bare airframe mass, kg.
    pub mass: f64,
    /// Diagonal body inertia, kg m^2.
    pub body_inertia: [f64; 3],
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Payload mass, kg; active while `payload_attached`.
    pub payload_mass: f64,
    pub payload_attached: bool,
    pub attitude_model: AttitudeModel,
}

impl QuadrotorParams {
    pub fn validate(&self) -> Result<()> {
        if self.mass <= 0.0 {
            return Err(CoreError::InvalidArgument("mass must be positive".into()));
        }
        if self.body_inertia.iter().any(|j| *j <= 0.0) {
            return Err(CoreError::NotPositiveDefinite(
                "body inertia entries must be positive".into(),
            ));
        }
        if self.payload_mass < 0.0 {
            return Err(CoreError::InvalidArgument(
                "payload mass cannot be negative".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_mass(&self) -> f64 {
        if self.payload_attached {
            self.mass + self.payload_mass
        } else {
            self.mass
        }
    }

    /// Payload scales the inertia with the mass ratio.
    fn inertia_scale(&self) -> f64 {
        self.effective_mass() / self.mass
    }

    fn body_inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.body_inertia)) * self.inertia_scale()
    }
}

/// Position, velocity, Euler attitude (roll, pitch, yaw) and attitude rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorState {
    pub p: Vector3<f64>,
    pub dp: Vector3<f64>,
    pub q: Vector3<f64>,
    pub dq: Vector3<f64>,
}

impl QuadrotorState {
    pub fn at_rest(p: Vector3<f64>) -> Self {
        Self {
            p,
            dp: Vector3::zeros(),
            q: Vector3::zeros(),
            dq: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> RotationMatrix {
        euler_to_rotation(self.q.x, self.q.y, self.q.z)
    }
}

/// Position reference with analytic derivatives and a yaw profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSetpoint {
    pub p_d: Vector3<f64>,
    pub dp_d: Vector3<f64>,
    pub ddp_d: Vector3<f64>,
    pub psi_d: f64,
    pub dpsi_d: f64,
}

/// Euler-rate map `W(q)`: body angular velocity is `W(q) dq` for the Z-Y-X
/// angles (roll, pitch, yaw).
fn euler_rate_map(q: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = q.x.sin_cos();
    let (st, ct) = q.y.sin_cos();
    Matrix3::new(
        1.0, 0.0, -st, //
        0.0, cp, ct * sp, //
        0.0, -sp, ct * cp,
    )
}

/// Partials of `W` with respect to roll and pitch (yaw does not enter).
fn euler_rate_map_partials(q: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (sp, cp) = q.x.sin_cos();
    let (st, ct) = q.y.sin_cos();
    let d_roll = Matrix3::new(
        0.0, 0.0, 0.0, //
        0.0, -sp, ct * cp, //
        0.0, -cp, -ct * sp,
    );
    let d_pitch = Matrix3::new(
        0.0, 0.0, -ct, //
        0.0, 0.0, -st * sp, //
        0.0, 0.0, -st * cp,
    );
    [d_roll, d_pitch, Matrix3::zeros()]
}

/// Configuration-dependent attitude inertia.
pub fn attitude_inertia(params: &QuadrotorParams, q: &Vector3<f64>) -> Matrix3<f64> {
    let jb = params.body_inertia_matrix();
    match params.attitude_model {
        AttitudeModel::Simplified => jb,
        AttitudeModel::Full => {
            let w = euler_rate_map(q);
            w.transpose() * jb * w
        }
    }
}

/// Coriolis matrix of the attitude subsystem via the Christoffel symbols of
/// `J(q)`; zero in the simplified model.
pub fn attitude_coriolis(
    params: &QuadrotorParams,
    q: &Vector3<f64>,
    dq: &Vector3<f64>,
) -> Matrix3<f64> {
    match params.attitude_model {
        AttitudeModel::Simplified => Matrix3::zeros(),
        AttitudeModel::Full => {
            let partials = attitude_inertia_partials(params, q);
            let mut c = Matrix3::zeros();
            for a in 0..3 {
                for b in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        acc += 0.5
                            * (partials[k][(a, b)] + partials[b][(a, k)] - partials[a][(k, b)])
                            * dq[k];
                    }
                    c[(a, b)] = acc;
                }
            }
            c
        }
    }
}

/// `dJ/dq_k` for the full model, used by the Coriolis construction and the
/// passivity check.
pub fn attitude_inertia_partials(params: &QuadrotorParams, q: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let jb = params.body_inertia_matrix();
    let w = euler_rate_map(q);
    let dw = euler_rate_map_partials(q);
    [
        dw[0].transpose() * jb * w + w.transpose() * jb * dw[0],
        dw[1].transpose() * jb * w + w.transpose() * jb * dw[1],
        Matrix3::zeros(),
    ]
}

/// Translational acceleration `ddp = (tau_p - G - d_p) / m`, with
/// `G = (0, 0, m g)` built from the effective mass.
pub fn position_dynamics(
    params: &QuadrotorParams,
    tau_p: &Vector3<f64>,
    d_p: &Vector3<f64>,
) -> Vector3<f64> {
    let m = params.effective_mass();
    let gravity = Vector3::new(0.0, 0.0, m * params.gravity);
    (tau_p - gravity - d_p) / m
}

/// Attitude acceleration `ddq = J(q)^-1 (tau_q - C_q dq - d_q)`.
pub fn attitude_dynamics(
    params: &QuadrotorParams,
    state: &QuadrotorState,
    tau_q: &Vector3<f64>,
    d_q: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let j = attitude_inertia(params, &state.q);
    let c = attitude_coriolis(params, &state.q, &state.dq);
    let rhs = tau_q - c * state.dq - d_q;
    j.try_inverse()
        .map(|ji| ji * rhs)
        .ok_or_else(|| CoreError::Singular("attitude inertia (gimbal singularity)".into()))
}

/// Collective thrust: the component of the commanded force along the current
/// body z-axis. The realized world-frame force is `u1 * R e3`, which differs
/// from `tau_p` whenever the attitude lags the desired one.
pub fn thrust_from_tau_p(tau_p: &Vector3<f64>, rotation: &RotationMatrix) -> f64 {
    tau_p.dot(&rotation.z_axis())
}

/// Minimum usable thrust-vector norm for the desired-attitude construction.
pub const THRUST_DEGENERACY_TOL: f64 = 1e-6;

/// Desired attitude from the commanded force and the desired yaw:
/// `z_B = tau_p/|tau_p|`, `y_A = (-sin psi_d, cos psi_d, 0)`,
/// `x_B = y_A x z_B` normalized, `y_B = z_B x x_B`, columns `[x_B y_B z_B]`.
pub fn desired_attitude(tau_p: &Vector3<f64>, psi_d: f64) -> Result<RotationMatrix> {
    let norm = tau_p.norm();
    if norm < THRUST_DEGENERACY_TOL {
        return Err(CoreError::DegenerateThrust(norm));
    }
    let z_b = tau_p / norm;
    let y_a = Vector3::new(-psi_d.sin(), psi_d.cos(), 0.0);
    let cross = y_a.cross(&z_b);
    let cross_norm = cross.norm();
    if cross_norm < THRUST_DEGENERACY_TOL {
        return Err(CoreError::DegenerateFrame(cross_norm));
    }
    let x_b = cross / cross_norm;
    let y_b = z_b.cross(&x_b);
    Ok(RotationMatrix::new_unchecked(Matrix3::from_columns(&[
        x_b, y_b, z_b,
    ])))
}

/// Rotation-matrix attitude error
/// `e_q = (R_d' R - R' R_d)^vee`, `de_q = dq - R_d' R dq_d`
/// exactly as defined (no 1/2 factor; positive when the actual attitude leads
/// the desired one).
pub fn attitude_error(
    r_d: &RotationMatrix,
    r: &RotationMatrix,
    dq: &Vector3<f64>,
    dq_d: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let rel = r_d.matrix().transpose() * r.matrix();
    let skew = &rel - rel.transpose();
    // rel - rel' is skew by construction; vee cannot fail here.
    let e_q = vee(&skew).expect("R_d'R - R'R_d is skew-symmetric");
    let de_q = dq - r_d.matrix().transpose() * r.matrix() * dq_d;
    (e_q, de_q)
}
