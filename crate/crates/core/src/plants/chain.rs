//! Planar n-link serial chain under gravity with viscous friction: the
//! Euler-Lagrange surrogate plant for the walking experiments. Supports one
//! to four links.
//!
//! Joint angles are measured from the downward vertical, so `q = 0` is the
//! hanging rest configuration. The inertia matrix comes from the link
//! Jacobians, the Coriolis matrix from the Christoffel symbols of `M(q)`,
//! which makes `dM/dt - 2C` skew-symmetric by construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{max_symmetric_eigenvalue, min_symmetric_eigenvalue, spectral_norm};

pub const MAX_LINKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Per-link mass, kg.
    pub masses: Vec<f64>,
    /// Per-link length, m.
    pub lengths: Vec<f64>,
    /// Center-of-mass offset along each link, m.
    pub com_offsets: Vec<f64>,
    /// Per-link rotational inertia about the center of mass, kg m^2.
    pub inertias: Vec<f64>,
    /// Per-joint viscous friction coefficients.
    pub viscous_friction: Vec<f64>,
    /// Gravitational acceleration, m/s^2 (set 0 for energy tests).
    pub gravity: f64,
}

impl ChainParams {
    pub fn dof(&self) -> usize {
        self.masses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dof();
        if n == 0 || n > MAX_LINKS {
            return Err(CoreError::InvalidArgument(format!(
                "chain supports 1..={MAX_LINKS} links, got {n}"
            )));
        }
        for (name, v) in [
            ("masses", &self.masses),
            ("lengths", &self.lengths),
            ("com_offsets", &self.com_offsets),
            ("inertias", &self.inertias),
            ("viscous_friction", &self.viscous_friction),
        ] {
            if v.len() != n {
                return Err(CoreError::DimensionMismatch(format!(
                    "{name} has {} entries, expected {n}",
                    v.len()
                )));
            }
        }
        if self
            .masses
            .iter()
            .chain(&self.lengths)
            .chain(&self.inertias)
            .any(|x| *x <= 0.0)
        {
            return Err(CoreError::InvalidArgument(
                "masses, lengths and inertias must be positive".into(),
            ));
        }
        if self.com_offsets.iter().any(|x| *x < 0.0) || self.viscous_friction.iter().any(|x| *x < 0.0)
        {
            return Err(CoreError::InvalidArgument(
                "com offsets and friction coefficients cannot be negative".into(),
            ));
        }
        Ok(())
    }
}

/// Kinematic scratch: cumulative angles and their sines/cosines.
struct Kinematics {
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl Kinematics {
    fn new(q: &DVector<f64>) -> Self {
        let mut theta = 0.0;
        let mut sin = Vec::with_capacity(q.len());
        let mut cos = Vec::with_capacity(q.len());
        for k in 0..q.len() {
            theta += q[k];
            sin.push(theta.sin());
            cos.push(theta.cos());
        }
        Self { sin, cos }
    }
}

/// d com_i / dq_k (zero for k > i); columns of the link Jacobian.
fn com_jacobian_column(
    params: &ChainParams,
    kin: &Kinematics,
    link: usize,
    k: usize,
) -> (f64, f64) {
    if k > link {
        return (0.0, 0.0);
    }
    let mut jx = 0.0;
    let mut jy = 0.0;
    for j in k..link {
        jx += params.lengths[j] * kin.cos[j];
        jy += params.lengths[j] * kin.sin[j];
    }
    jx += params.com_offsets[link] * kin.cos[link];
    jy += params.com_offsets[link] * kin.sin[link];
    (jx, jy)
}

/// d^2 com_i / dq_k dq_m (zero unless both indices are <= i).
fn com_hessian_entry(
    params: &ChainParams,
    kin: &Kinematics,
    link: usize,
    k: usize,
    m: usize,
) -> (f64, f64) {
    if k > link || m > link {
        return (0.0, 0.0);
    }
    let lo = k.max(m);
    let mut hx = 0.0;
    let mut hy = 0.0;
    for j in lo..link {
        hx -= params.lengths[j] * kin.sin[j];
        hy += params.lengths[j] * kin.cos[j];
    }
    hx -= params.com_offsets[link] * kin.sin[link];
    hy += params.com_offsets[link] * kin.cos[link];
    (hx, hy)
}

/// Generalized inertia matrix `M(q)`, symmetric positive definite.
pub fn mass_matrix(params: &ChainParams, q: &DVector<f64>) -> DMatrix<f64> {
    let n = params.dof();
    let kin = Kinematics::new(q);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for a in 0..=i {
            let ja = com_jacobian_column(params, &kin, i, a);
            for b in 0..=i {
                let jb = com_jacobian_column(params, &kin, i, b);
                m[(a, b)] += params.masses[i] * (ja.0 * jb.0 + ja.1 * jb.1) + params.inertias[i];
            }
        }
    }
    m
}

/// `dM/dq_k` for every k; feeds the Christoffel symbols and the passivity
/// diagnostic.
pub fn mass_matrix_partials(params: &ChainParams, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let n = params.dof();
    let kin = Kinematics::new(q);
    let mut partials = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        let jac: Vec<(f64, f64)> = (0..=i)
            .map(|a| com_jacobian_column(params, &kin, i, a))
            .collect();
        for k in 0..=i {
            for a in 0..=i {
                let ha = com_hessian_entry(params, &kin, i, a, k);
                for b in 0..=i {
                    let hb = com_hessian_entry(params, &kin, i, b, k);
                    partials[k][(a, b)] += params.masses[i]
                        * (ha.0 * jac[b].0 + ha.1 * jac[b].1 + jac[a].0 * hb.0 + jac[a].1 * hb.1);
                }
            }
        }
    }
    partials
}

/// Coriolis/centripetal matrix from the Christoffel symbols of `M(q)`.
pub fn coriolis_matrix(params: &ChainParams, q: &DVector<f64>, dq: &DVector<f64>) -> DMatrix<f64> {
    let n = params.dof();
    let partials = mass_matrix_partials(params, q);
    let mut c = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += 0.5
                    * (partials[k][(a, b)] + partials[b][(a, k)] - partials[a][(k, b)])
                    * dq[k];
            }
            c[(a, b)] = acc;
        }
    }
    c
}

/// Gravity torque vector `G(q)`.
pub fn gravity_vector(params: &ChainParams, q: &DVector<f64>) -> DVector<f64> {
    let n = params.dof();
    let kin = Kinematics::new(q);
    let mut g = DVector::zeros(n);
    for i in 0..n {
        for a in 0..=i {
            // dy_i/dq_a enters the potential gradient.
            let (_, jy) = com_jacobian_column(params, &kin, i, a);
            g[a] += params.masses[i] * params.gravity * jy;
        }
    }
    g
}

/// Viscous friction torque `f(dq)`.
pub fn friction(params: &ChainParams, dq: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        params.dof(),
        params
            .viscous_friction
            .iter()
            .zip(dq.iter())
            .map(|(f, v)| f * v),
    )
}

/// Forward dynamics `ddq = M(q)^-1 (tau - C dq - G - f - d)`.
pub fn chain_dynamics(
    params: &ChainParams,
    q: &DVector<f64>,
    dq: &DVector<f64>,
    tau: &DVector<f64>,
    disturbance: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = params.dof();
    if q.len() != n || dq.len() != n || tau.len() != n || disturbance.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "expected {n}-dof vectors"
        )));
    }
    let m = mass_matrix(params, q);
    let rhs =
        tau - coriolis_matrix(params, q, dq) * dq - gravity_vector(params, q) - friction(params, dq)
            - disturbance;
    m.lu()
        .solve(&rhs)
        .ok_or_else(|| CoreError::Singular("chain inertia matrix".into()))
}

/// Total mechanical energy, kinetic plus gravitational potential.
pub fn total_energy(params: &ChainParams, q: &DVector<f64>, dq: &DVector<f64>) -> f64 {
    let kinetic = 0.5 * dq.dot(&(mass_matrix(params, q) * dq));
    let kin = Kinematics::new(q);
    let mut potential = 0.0;
    for i in 0..params.dof() {
        let mut y = 0.0;
        for j in 0..i {
            y -= params.lengths[j] * kin.cos[j];
        }
        y -= params.com_offsets[i] * kin.cos[i];
        potential += params.masses[i] * params.gravity * y;
    }
    kinetic + potential
}

/// Empirical bounds report: inertia eigenvalue range and the Coriolis growth
/// coefficient `C_b` with `|C| <= C_b |dq|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyBounds {
    pub psi1: f64,
    pub psi2: f64,
    pub coriolis_bound: f64,
}

/// Sweeps the provided samples to estimate the boundedness constants used by
/// the nominal-inertia selection check.
pub fn property_bounds_check(
    params: &ChainParams,
    q_samples: &[DVector<f64>],
    dq_samples: &[DVector<f64>],
) -> Result<PropertyBounds> {
    if q_samples.is_empty() {
        return Err(CoreError::InvalidArgument("no samples provided".into()));
    }
    let mut psi1 = f64::INFINITY;
    let mut psi2 = f64::NEG_INFINITY;
    for q in q_samples {
        let m = mass_matrix(params, q);
        psi1 = psi1.min(min_symmetric_eigenvalue(&m));
        psi2 = psi2.max(max_symmetric_eigenvalue(&m));
    }
    let mut coriolis_bound = 0.0f64;
    for q in q_samples {
        for dq in dq_samples {
            let speed = dq.norm();
            if speed > 1e-12 {
                let c = coriolis_matrix(params, q, dq);
                coriolis_bound = coriolis_bound.max(spectral_norm(&c) / speed);
            }
        }
    }
    Ok(PropertyBounds {
        psi1,
        psi2,
        coriolis_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpulseShape {
    HalfSine,
    Rectangular,
}

/// One impulsive force event; with `period` set the pulse repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEvent {
    pub start: f64,
    pub duration: f64,
    pub peak: f64,
    /// Per-channel weights multiplying the pulse amplitude.
    pub channels: Vec<f64>,
    pub shape: ImpulseShape,
    #[serde(default)]
    pub period: Option<f64>,
}

impl ImpulseEvent {
    pub fn validate(&self, dof: usize) -> Result<()> {
        if self.duration <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "impulse duration must be positive".into(),
            ));
        }
        if self.channels.len() != dof {
            return Err(CoreError::DimensionMismatch(format!(
                "impulse channel mask has {} entries, plant has {dof}",
                self.channels.len()
            )));
        }
        if let Some(p) = self.period {
            if p <= self.duration {
                return Err(CoreError::InvalidArgument(
                    "impulse repeat period must exceed its duration".into(),
                ));
            }
        }
        Ok(())
    }

    fn amplitude(&self, t: f64) -> f64 {
        let local = match self.period {
            Some(period) => {
                if t < self.start {
                    return 0.0;
                }
                (t - self.start) % period
            }
            None => t - self.start,
        };
        if !(0.0..self.duration).contains(&local) {
            return 0.0;
        }
        match self.shape {
            ImpulseShape::HalfSine => self.peak * (std::f64::consts::PI * local / self.duration).sin(),
            ImpulseShape::Rectangular => self.peak,
        }
    }
}

/// Disturbance model `d = bias + D0 q + D1 |dq| dq + impulses`, the
/// state-dependent class that defeats a-priori-bounded designs.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceProfile {
    pub bias: DVector<f64>,
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub impulses: Vec<ImpulseEvent>,
}

impl DisturbanceProfile {
    pub fn zero(dof: usize) -> Self {
        Self {
            bias: DVector::zeros(dof),
            d0: DMatrix::zeros(dof, dof),
            d1: DMatrix::zeros(dof, dof),
            impulses: Vec::new(),
        }
    }

    pub fn at(&self, t: f64, q: &DVector<f64>, dq: &DVector<f64>) -> DVector<f64> {
        let mut d = &self.bias + &self.d0 * q + &self.d1 * dq * dq.norm();
        for imp in &self.impulses {
            let a = imp.amplitude(t);
            if a != 0.0 {
                for (ch, w) in imp.channels.iter().enumerate() {
                    d[ch] += a * w;
                }
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn two_link() -> ChainParams {
        ChainParams {
            masses: vec![1.0, 0.8],
            lengths: vec![0.5, 0.4],
            com_offsets: vec![0.25, 0.2],
            inertias: vec![0.05, 0.05],
            viscous_friction: vec![0.0, 0.0],
            gravity: 9.81,
        }
    }

    fn pendulum() -> ChainParams {
        ChainParams {
            masses: vec![1.2],
            lengths: vec![0.7],
            com_offsets: vec![0.35],
            inertias: vec![0.049],
            viscous_friction: vec![0.03],
            gravity: 9.81,
        }
    }

    /// Textbook closed-form two-link matrices (angles from the downward
    /// vertical, inertias about the centers of mass) used as the oracle for
    /// the Jacobian/Christoffel composition.
    fn two_link_oracle(
        p: &ChainParams,
        q: &DVector<f64>,
        dq: &DVector<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let (m1, m2) = (p.masses[0], p.masses[1]);
        let l1 = p.lengths[0];
        let (lc1, lc2) = (p.com_offsets[0], p.com_offsets[1]);
        let (i1, i2) = (p.inertias[0], p.inertias[1]);
        let g = p.gravity;
        let c2 = q[1].cos();
        let s2 = q[1].sin();

        let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = i2 + m2 * lc2 * lc2;
        let m = DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22]);

        let h = -m2 * l1 * lc2 * s2;
        let c = DMatrix::from_row_slice(
            2,
            2,
            &[h * dq[1], h * (dq[0] + dq[1]), -h * dq[0], 0.0],
        );

        let s1 = q[0].sin();
        let s12 = (q[0] + q[1]).sin();
        let g1 = (m1 * lc1 + m2 * l1) * g * s1 + m2 * lc2 * g * s12;
        let g2 = m2 * lc2 * g * s12;
        (m, c, DVector::from_row_slice(&[g1, g2]))
    }

    #[test]
    fn two_link_matches_closed_form_oracle() {
        let p = two_link();
        for (qa, qb, da, db) in [
            (0.0, 0.0, 0.0, 0.0),
            (0.4, -0.7, 1.0, -2.0),
            (1.2, 0.3, -0.5, 0.8),
            (-2.0, 1.6, 2.0, 3.0),
        ] {
            let q = DVector::from_row_slice(&[qa, qb]);
            let dq = DVector::from_row_slice(&[da, db]);
            let (m_ref, c_ref, g_ref) = two_link_oracle(&p, &q, &dq);
            assert!((mass_matrix(&p, &q) - &m_ref).norm() < 1e-12);
            assert!((coriolis_matrix(&p, &q, &dq) - &c_ref).norm() < 1e-12);
            assert!((gravity_vector(&p, &q) - &g_ref).norm() < 1e-12);
        }
    }

    #[test]
    fn static_equilibrium_torque_cancels_gravity() {
        let p = two_link();
        let q = DVector::from_row_slice(&[0.9, -0.4]);
        let dq = DVector::zeros(2);
        let tau = gravity_vector(&p, &q);
        let ddq = chain_dynamics(&p, &q, &dq, &tau, &DVector::zeros(2)).unwrap();
        assert!(ddq.norm() < 1e-12);
    }

    #[test]
    fn pendulum_analytic_formula() {
        // ddq = (tau - m g lc sin q - f dq) / (I + m lc^2)
        let p = pendulum();
        let q = DVector::from_row_slice(&[0.6]);
        let dq = DVector::from_row_slice(&[-1.4]);
        let tau = DVector::from_row_slice(&[0.9]);
        let ddq = chain_dynamics(&p, &q, &dq, &tau, &DVector::zeros(1)).unwrap();
        let inertia = p.inertias[0] + p.masses[0] * p.com_offsets[0] * p.com_offsets[0];
        let expected = (tau[0]
            - p.masses[0] * p.gravity * p.com_offsets[0] * q[0].sin()
            - p.viscous_friction[0] * dq[0])
            / inertia;
        assert_relative_eq!(ddq[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn property_bounds_pendulum_constant_inertia() {
        let p = pendulum();
        let q_samples: Vec<_> = (0..20)
            .map(|k| DVector::from_row_slice(&[k as f64 * 0.3 - 3.0]))
            .collect();
        let dq_samples: Vec<_> = (1..5)
            .map(|k| DVector::from_row_slice(&[k as f64]))
            .collect();
        let b = property_bounds_check(&p, &q_samples, &dq_samples).unwrap();
        let inertia = p.inertias[0] + p.masses[0] * p.com_offsets[0] * p.com_offsets[0];
        assert_relative_eq!(b.psi1, inertia, epsilon = 1e-12);
        assert_relative_eq!(b.psi2, inertia, epsilon = 1e-12);
        assert_eq!(b.coriolis_bound, 0.0);
    }

    #[test]
    fn property_bounds_two_link_and_mass_scaling() {
        let p = two_link();
        let q_samples: Vec<_> = (0..25)
            .map(|k| DVector::from_row_slice(&[(k as f64 * 0.37).sin() * 3.0, (k as f64 * 0.61).cos() * 3.0]))
            .collect();
        let dq_samples: Vec<_> = (1..6)
            .map(|k| DVector::from_row_slice(&[k as f64 * 0.7, -(k as f64) * 0.3]))
            .collect();
        let b = property_bounds_check(&p, &q_samples, &dq_samples).unwrap();
        assert!(b.psi1 > 0.0);
        assert!(b.psi2 / b.psi1 > 1.0);
        assert!(b.coriolis_bound > 0.0);

        // Doubling the masses doubles the eigenvalue bounds (inertias scale too).
        let mut scaled = p.clone();
        for m in &mut scaled.masses {
            *m *= 2.0;
        }
        for i in &mut scaled.inertias {
            *i *= 2.0;
        }
        let b2 = property_bounds_check(&scaled, &q_samples, &dq_samples).unwrap();
        assert_relative_eq!(b2.psi1, 2.0 * b.psi1, epsilon = 1e-9);
        assert_relative_eq!(b2.psi2, 2.0 * b.psi2, epsilon = 1e-9);
    }

    #[test]
    fn coriolis_growth_bound_holds_on_fresh_samples() {
        // Fit C_b on one sample set, then verify on a 10x denser fresh set.
        let p = two_link();
        let fit_q: Vec<_> = (0..10)
            .map(|k| DVector::from_row_slice(&[k as f64 * 0.63, -(k as f64) * 0.29]))
            .collect();
        let fit_dq: Vec<_> = (1..8)
            .map(|k| DVector::from_row_slice(&[(k as f64 * 1.3).sin() * 4.0, (k as f64 * 0.7).cos() * 4.0]))
            .collect();
        let b = property_bounds_check(&p, &fit_q, &fit_dq).unwrap();
        // |C| depends on q only through bounded trig terms and is linear in dq;
        // the maximum over any q of |C|/|dq| is what the fit estimates. Verify
        // with a small safety margin on fresh pseudo-random samples.
        for k in 0..100 {
            let q = DVector::from_row_slice(&[(k as f64 * 0.77).sin() * 3.0, (k as f64 * 1.13).cos() * 3.0]);
            let dq = DVector::from_row_slice(&[(k as f64 * 0.41).cos() * 5.0, (k as f64 * 0.93).sin() * 5.0]);
            let c = coriolis_matrix(&p, &q, &dq);
            assert!(
                spectral_norm(&c) <= b.coriolis_bound * dq.norm() * 1.05 + 1e-12,
                "C_b violated at sample {k}"
            );
        }
    }

    #[test]
    fn disturbance_profile_evaluation() {
        let mut prof = DisturbanceProfile::zero(2);
        assert_eq!(
            prof.at(1.0, &DVector::zeros(2), &DVector::zeros(2)),
            DVector::zeros(2)
        );

        // Half-sine impulse at its midpoint contributes its full peak.
        prof.impulses.push(ImpulseEvent {
            start: 1.0,
            duration: 0.1,
            peak: 10.0,
            channels: vec![1.0, 0.0],
            shape: ImpulseShape::HalfSine,
            period: None,
        });
        let d = prof.at(1.05, &DVector::zeros(2), &DVector::zeros(2));
        assert_relative_eq!(d[0], 10.0, epsilon = 1e-12);
        assert_eq!(d[1], 0.0);
        assert_eq!(
            prof.at(1.2, &DVector::zeros(2), &DVector::zeros(2)),
            DVector::zeros(2)
        );

        // State-dependent quadratic term: D1 = I, dq = (2, 0) gives (4, 0).
        let mut prof = DisturbanceProfile::zero(2);
        prof.d1 = DMatrix::identity(2, 2);
        let dq = DVector::from_row_slice(&[2.0, 0.0]);
        let d = prof.at(0.0, &DVector::zeros(2), &dq);
        assert_relative_eq!(d[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn repeating_impulse_train() {
        let imp = ImpulseEvent {
            start: 0.5,
            duration: 0.2,
            peak: 1.0,
            channels: vec![1.0],
            shape: ImpulseShape::Rectangular,
            period: Some(1.0),
        };
        assert_eq!(imp.amplitude(0.4), 0.0);
        assert_eq!(imp.amplitude(0.6), 1.0);
        assert_eq!(imp.amplitude(1.6), 1.0);
        assert_eq!(imp.amplitude(1.8), 0.0);
        assert_eq!(imp.amplitude(7.55), 1.0);
    }

    #[test]
    fn rejects_unsupported_dof() {
        let mut p = two_link();
        p.masses = vec![1.0; 5];
        p.lengths = vec![1.0; 5];
        p.com_offsets = vec![0.5; 5];
        p.inertias = vec![0.1; 5];
        p.viscous_friction = vec![0.0; 5];
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn mass_matrix_is_spd(
            q1 in -3.2f64..3.2,
            q2 in -3.2f64..3.2,
        ) {
            let p = two_link();
            let q = DVector::from_row_slice(&[q1, q2]);
            let m = mass_matrix(&p, &q);
            prop_assert!((&m - m.transpose()).norm() < 1e-12);
            prop_assert!(min_symmetric_eigenvalue(&m) > 0.0);
        }

        #[test]
        fn passivity_skew_symmetry(
            q1 in -3.2f64..3.2,
            q2 in -3.2f64..3.2,
            d1 in -5.0f64..5.0,
            d2 in -5.0f64..5.0,
        ) {
            let p = two_link();
            let q = DVector::from_row_slice(&[q1, q2]);
            let dq = DVector::from_row_slice(&[d1, d2]);
            let partials = mass_matrix_partials(&p, &q);
            let mdot = &partials[0] * dq[0] + &partials[1] * dq[1];
            let c = coriolis_matrix(&p, &q, &dq);
            let skew = mdot - 2.0 * c;
            prop_assert!((&skew + skew.transpose()).norm() < 1e-9);
        }

        #[test]
        fn three_link_partials_match_finite_differences(
            q1 in -2.0f64..2.0,
            q2 in -2.0f64..2.0,
            q3 in -2.0f64..2.0,
        ) {
            let p = ChainParams {
                masses: vec![1.0, 0.8, 0.5],
                lengths: vec![0.5, 0.4, 0.3],
                com_offsets: vec![0.25, 0.2, 0.15],
                inertias: vec![0.05, 0.04, 0.02],
                viscous_friction: vec![0.0; 3],
                gravity: 9.81,
            };
            let q = DVector::from_row_slice(&[q1, q2, q3]);
            let partials = mass_matrix_partials(&p, &q);
            let h = 1e-6;
            for k in 0..3 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                let fd = (mass_matrix(&p, &qp) - mass_matrix(&p, &qm)) / (2.0 * h);
                prop_assert!((&partials[k] - fd).norm() < 1e-7);
            }
        }
    }
}
