//! Small dense linear-algebra utilities used by the controllers: the
//! continuous Lyapunov solve, companion-matrix construction, Z-Y-X Euler
//! rotation kinematics and the hat/vee maps.
//!
//! Everything here is sized for control use (n <= 12); solves are direct.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{CoreError, Result};

/// Relative residual allowed on the Lyapunov solve, `|A'P + PA + Q|_F < tol * |Q|_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Frobenius tolerance accepted when validating a rotation matrix.
pub const ROTATION_TOL: f64 = 1e-12;

/// Asymmetry tolerance for the vee map, `|S + S'|_F`.
pub const SKEW_TOL: f64 = 1e-9;

/// Solves the continuous Lyapunov equation `A'P + PA = -Q` for symmetric
/// positive definite `P`.
///
/// Uses Kronecker vectorization: `(I (x) A' + A' (x) I) vec(P) = -vec(Q)`,
/// solved densely. The result is symmetrized to remove round-off asymmetry
/// and rejected if `A` was not Hurwitz (detected through a singular system
/// or a non-positive-definite solution).
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || !q.is_square() || q.nrows() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if !is_symmetric(q, 1e-12) {
        return Err(CoreError::InvalidArgument("Q must be symmetric".into()));
    }

    // I (x) A' + A' (x) I acting on vec(P), column-major.
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(&at) + at.kronecker(&eye);

    let rhs = DVector::from_column_slice((-q).as_slice());
    let lu = system.lu();
    let vec_p = lu.solve(&rhs).ok_or_else(|| {
        CoreError::NotHurwitz(
            "Lyapunov system is singular; A has an eigenvalue pair summing to zero".into(),
        )
    })?;

    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = symmetrize(&p);

    // A Hurwitz A together with SPD Q forces P > 0; a sign-indefinite P
    // exposes a non-Hurwitz input that the solve itself did not catch.
    let min_eig = min_symmetric_eigenvalue(&p);
    if min_eig <= 0.0 {
        return Err(CoreError::NotHurwitz(format!(
            "solution P has eigenvalue {min_eig:.3e} <= 0; A has an eigenvalue with nonnegative real part"
        )));
    }

    let residual = (&at * &p + &p * a + q).norm();
    if residual > LYAPUNOV_RESIDUAL_TOL * q.norm() {
        return Err(CoreError::NotHurwitz(format!(
            "Lyapunov residual {residual:.3e} exceeds tolerance; A is ill-conditioned or not Hurwitz"
        )));
    }

    Ok(p)
}

/// Builds the error-dynamics companion matrix `[[0, I], [-Kp, -Kd]]`.
///
/// `kp` and `kd` must be square with matching dimension; positive definite
/// gains make the result Hurwitz.
pub fn companion_matrix(kp: &DMatrix<f64>, kd: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = kp.nrows();
    if !kp.is_square() || !kd.is_square() || kd.nrows() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "Kp is {}x{}, Kd is {}x{}",
            kp.nrows(),
            kp.ncols(),
            kd.nrows(),
            kd.ncols()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    for r in 0..n {
        for c in 0..n {
            a[(n + r, c)] = -kp[(r, c)];
            a[(n + r, n + c)] = -kd[(r, c)];
        }
    }
    Ok(a)
}

/// A validated member of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    /// Wraps a matrix after checking `R'R = I` and `det R = 1` (both to 1e-12).
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if ortho > ROTATION_TOL {
            return Err(CoreError::InvalidRotation(format!(
                "R'R deviates from identity by {ortho:.3e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(CoreError::InvalidRotation(format!("det R = {det} != 1")));
        }
        Ok(Self(m))
    }

    /// Wraps without validation; for matrices constructed orthonormal.
    pub(crate) fn new_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Third column: the body z-axis expressed in the world frame.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.0.column(2).into()
    }

    /// Recovers the (roll, pitch, yaw) angles of the Z-Y-X factorization.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }
}

impl std::ops::Deref for RotationMatrix {
    type Target = Matrix3<f64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// Z-Y-X Euler angle rotation matrix (body to world), entry for entry:
///
/// ```text
/// [ c_psi c_th   c_psi s_th s_ph - s_psi c_ph   c_psi s_th c_ph + s_psi s_ph ]
/// [ s_psi c_th   s_psi s_th s_ph + c_psi c_ph   s_psi s_th c_ph - c_psi s_ph ]
/// [   -s_th              s_ph c_th                        c_th c_ph          ]
/// ```
pub fn euler_to_rotation(roll: f64, pitch: f64, yaw: f64) -> RotationMatrix {
    let (sp, cp) = roll.sin_cos();
    let (st, ct) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    RotationMatrix::new_unchecked(Matrix3::new(
        cy * ct,
        cy * st * sp - sy * cp,
        cy * st * cp + sy * sp,
        sy * ct,
        sy * st * sp + cy * cp,
        sy * st * cp - cy * sp,
        -st,
        sp * ct,
        ct * cp,
    ))
}

/// Hat map: the skew-symmetric matrix with `hat(v) w = v x w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Vee map, the inverse of [`hat`]. Rejects inputs whose asymmetry
/// `|S + S'|_F` exceeds [`SKEW_TOL`], reporting the measured value.
pub fn vee(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asymmetry = (s + s.transpose()).norm();
    if asymmetry > SKEW_TOL {
        return Err(CoreError::NotSkewSymmetric {
            asymmetry,
            tolerance: SKEW_TOL,
        });
    }
    Ok(Vector3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= tol * m.norm().max(1.0)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Oracle for the 2x2 case used by the biped gains: with A = [[0,1],[-kp,-kd]]
    /// and symmetric P = [[p11,p12],[p12,p22]], A'P + PA = -Q reduces to three
    /// linear equations solved here by hand-coded elimination.
    fn lyapunov_2x2_oracle(kp: f64, kd: f64, q: &DMatrix<f64>) -> DMatrix<f64> {
        // Equations (row-wise from A'P + PA + Q = 0):
        //  -2 kp p12 + q11 = 0
        //  p11 - kd p12 - kp p22 + q12 = 0
        //  2 p12 - 2 kd p22 + q22 = 0
        let p12 = q[(0, 0)] / (2.0 * kp);
        let p22 = (2.0 * p12 + q[(1, 1)]) / (2.0 * kd);
        let p11 = kd * p12 + kp * p22 - q[(0, 1)];
        DMatrix::from_row_slice(2, 2, &[p11, p12, p12, p22])
    }

    #[test]
    fn lyapunov_scalar() {
        // A = [-1], Q = [2]: -2P = -Q forces P = Q/2 = [1].
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let q = DMatrix::from_row_slice(1, 1, &[2.0]);
        let p = lyapunov_solve(&a, &q).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_decoupled_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let q = DMatrix::identity(2, 2);
        let p = lyapunov_solve(&a, &q).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[(1, 1)], 0.25, epsilon = 1e-14);
        assert_relative_eq!(p[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_companion_matches_elimination_oracle() {
        let (kp, kd) = (25.0, 10.0);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -kp, -kd]);
        let q = DMatrix::identity(2, 2);
        let p = lyapunov_solve(&a, &q).unwrap();
        let expected = lyapunov_2x2_oracle(kp, kd, &q);
        assert!((&p - &expected).norm() < 1e-12, "P = {p}, oracle = {expected}");
        let residual = (a.transpose() * &p + &p * &a + &q).norm();
        assert!(residual < 1e-10 * q.norm());
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let q = DMatrix::from_row_slice(1, 1, &[1.0]);
        let err = lyapunov_solve(&a, &q).unwrap_err();
        assert!(matches!(err, CoreError::NotHurwitz(_)), "got {err:?}");

        // Marginal: eigenvalues +-i make I (x) A' + A' (x) I singular.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let q = DMatrix::identity(2, 2);
        assert!(lyapunov_solve(&a, &q).is_err());
    }

    #[test]
    fn companion_block_layout() {
        let kp = DMatrix::from_diagonal_element(1, 1, 25.0);
        let kd = DMatrix::from_diagonal_element(1, 1, 10.0);
        let a = companion_matrix(&kp, &kd).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -25.0, -10.0]));
    }

    #[test]
    fn companion_unit_gains_eigenvalues() {
        // Characteristic polynomial l^2 + l + 1: eigenvalues -0.5 +- i sqrt(3)/2.
        let kp = DMatrix::identity(1, 1);
        let kd = DMatrix::identity(1, 1);
        let a = companion_matrix(&kp, &kd).unwrap();
        let eigs = a.complex_eigenvalues();
        for e in eigs.iter() {
            assert_relative_eq!(e.re, -0.5, epsilon = 1e-12);
            assert_relative_eq!(e.im.abs(), 3.0_f64.sqrt() / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn companion_3dof_entrywise() {
        let kp = DMatrix::from_diagonal_element(3, 3, 10.0);
        let kd = DMatrix::from_diagonal_element(3, 3, 5.0);
        let a = companion_matrix(&kp, &kd).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let eye = if r == c { 1.0 } else { 0.0 };
                assert_eq!(a[(r, c)], 0.0);
                assert_eq!(a[(r, 3 + c)], eye);
                assert_eq!(a[(3 + r, c)], -10.0 * eye);
                assert_eq!(a[(3 + r, 3 + c)], -5.0 * eye);
            }
        }
    }

    #[test]
    fn companion_rejects_mismatched_gains() {
        let kp = DMatrix::identity(2, 2);
        let kd = DMatrix::identity(3, 3);
        assert!(companion_matrix(&kp, &kd).is_err());
    }

    #[test]
    fn rotation_zero_angles_is_identity() {
        let r = euler_to_rotation(0.0, 0.0, 0.0);
        assert!((r.matrix() - Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn rotation_pure_yaw_quarter_turn() {
        // Substituting (0, 0, pi/2) by hand: the frame x-axis maps to world y.
        let r = euler_to_rotation(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn rotation_pure_roll_quarter_turn() {
        let r = euler_to_rotation(std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!((r.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn vee_of_zero_and_hat_roundtrip() {
        assert_eq!(vee(&Matrix3::zeros()).unwrap(), Vector3::zeros());
        for v in [Vector3::new(1.0, 2.0, 3.0), Vector3::new(-0.1, 0.2, 0.0)] {
            assert_eq!(vee(&hat(&v)).unwrap(), v);
        }
    }

    #[test]
    fn vee_rejects_non_skew() {
        let err = vee(&Matrix3::identity()).unwrap_err();
        match err {
            CoreError::NotSkewSymmetric { asymmetry, .. } => {
                assert_relative_eq!(asymmetry, 2.0 * 3.0_f64.sqrt(), epsilon = 1e-12)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn euler_roundtrip() {
        let (roll, pitch, yaw) = (0.3, -0.4, 1.2);
        let r = euler_to_rotation(roll, pitch, yaw);
        let (r2, p2, y2) = r.to_euler();
        assert_relative_eq!(roll, r2, epsilon = 1e-12);
        assert_relative_eq!(pitch, p2, epsilon = 1e-12);
        assert_relative_eq!(yaw, y2, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn lyapunov_random_companion_spd(
            n in 1usize..=6,
            kp_seed in proptest::collection::vec(0.5f64..50.0, 6),
            kd_seed in proptest::collection::vec(0.5f64..50.0, 6),
        ) {
            let kp = DMatrix::from_diagonal(&DVector::from_iterator(n, kp_seed[..n].iter().copied()));
            let kd = DMatrix::from_diagonal(&DVector::from_iterator(n, kd_seed[..n].iter().copied()));
            let a = companion_matrix(&kp, &kd).unwrap();
            let q = DMatrix::identity(2 * n, 2 * n);
            let p = lyapunov_solve(&a, &q).unwrap();
            let residual = (a.transpose() * &p + &p * &a + &q).norm();
            prop_assert!(residual < 1e-10 * q.norm());
            prop_assert!(min_symmetric_eigenvalue(&p) > 0.0);
        }

        #[test]
        fn companion_is_hurwitz_for_pd_gains(
            n in 1usize..=4,
            kp_seed in proptest::collection::vec(0.1f64..100.0, 4),
            kd_seed in proptest::collection::vec(0.1f64..100.0, 4),
        ) {
            let kp = DMatrix::from_diagonal(&DVector::from_iterator(n, kp_seed[..n].iter().copied()));
            let kd = DMatrix::from_diagonal(&DVector::from_iterator(n, kd_seed[..n].iter().copied()));
            let a = companion_matrix(&kp, &kd).unwrap();
            for e in a.complex_eigenvalues().iter() {
                prop_assert!(e.re < 0.0, "eigenvalue {e} not in the left half-plane");
            }
        }

        #[test]
        fn rotation_always_orthonormal(
            roll in -3.2f64..3.2,
            pitch in -3.2f64..3.2,
            yaw in -3.2f64..3.2,
        ) {
            let r = euler_to_rotation(roll, pitch, yaw);
            let m = r.matrix();
            prop_assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn hat_vee_identities(
            x in -10.0f64..10.0,
            y in -10.0f64..10.0,
            z in -10.0f64..10.0,
        ) {
            let v = Vector3::new(x, y, z);
            prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
            // hat(vee(S)) = (S - S')/2 for skew S (here exactly S).
            let s = hat(&v);
            prop_assert_eq!(hat(&vee(&s).unwrap()), (s - s.transpose()) * 0.5);
        }
    }
}
