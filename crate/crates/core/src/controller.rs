//! The controller family: classical TDC, the scalar-gain ATDE baseline and
//! the adaptive-robust ARTDE, plus the shared sliding-variable machinery.
//!
//! All three share the same structure
//!
//! ```text
//! tau = N_hat  +  M_nom (ddq_ref + Kd de + Kp e)  +  M_nom * du
//! ```
//!
//! and differ only in the robust term `du`: zero for TDC, a scalar adaptive
//! gain for ATDE, and the state-dependent gain `c = beta0 + beta1 |xi|` for
//! ARTDE.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::linalg::{self, spectral_norm};
use crate::tde::{difference_acceleration, DelayLine, DelaySample};

/// Controller variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Tdc,
    Atde,
    Artde,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Tdc => "tdc",
            Variant::Atde => "atde",
            Variant::Artde => "artde",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tdc" | "tde" => Ok(Variant::Tdc),
            "atde" => Ok(Variant::Atde),
            "artde" => Ok(Variant::Artde),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown controller variant '{other}' (expected tdc, atde or artde)"
            ))),
        }
    }
}

/// Tracking error pair `e = reference - actual` and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    pub e: DVector<f64>,
    pub de: DVector<f64>,
}

impl ErrorState {
    pub fn new(e: DVector<f64>, de: DVector<f64>) -> Result<Self> {
        if e.len() != de.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "error dimension {} vs derivative dimension {}",
                e.len(),
                de.len()
            )));
        }
        Ok(Self { e, de })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            e: DVector::zeros(n),
            de: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    /// Stacked error `xi = [e' de']'`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.e.len();
        let mut xi = DVector::zeros(2 * n);
        xi.rows_mut(0, n).copy_from(&self.e);
        xi.rows_mut(n, n).copy_from(&self.de);
        xi
    }

    pub fn stacked_norm(&self) -> f64 {
        (self.e.norm_squared() + self.de.norm_squared()).sqrt()
    }
}

/// Adaptive gain pair with enforced floors and per-gain adaptation rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimates {
    pub beta0: f64,
    pub beta1: f64,
    pub beta0_min: f64,
    pub beta1_min: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl GainEstimates {
    /// Initial estimates are clamped up to the floors, matching the
    /// requirement that they start at or above them.
    pub fn new(
        beta0_init: f64,
        beta1_init: f64,
        beta0_min: f64,
        beta1_min: f64,
        gamma0: f64,
        gamma1: f64,
    ) -> Result<Self> {
        if beta0_min < 0.0 || beta1_min < 0.0 {
            return Err(CoreError::InvalidArgument(
                "gain floors must be nonnegative".into(),
            ));
        }
        if gamma0 <= 0.0 || gamma1 <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "adaptation rates must be positive".into(),
            ));
        }
        Ok(Self {
            beta0: beta0_init.max(beta0_min),
            beta1: beta1_init.max(beta1_min),
            beta0_min,
            beta1_min,
            gamma0,
            gamma1,
        })
    }
}

/// Which branch of the adaptive law fired; the two are logical complements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptBranch {
    Increase,
    Decrease,
}

/// Per-loop controller configuration.
///
/// `m_nom` is the constant nominal inertia (`M_nom`, `m_nom I` or `J_nom`
/// depending on the plant); `kp`/`kd` the desired-dynamics gains; `q_lyap`
/// the Lyapunov right-hand side defining the sliding variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub m_nom: DMatrix<f64>,
    pub kp: DMatrix<f64>,
    pub kd: DMatrix<f64>,
    pub q_lyap: DMatrix<f64>,
    pub alpha: f64,
    pub epsilon: f64,
    pub period: f64,
    pub variant: Variant,
}

impl ControllerConfig {
    pub fn dim(&self) -> usize {
        self.m_nom.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.m_nom.nrows();
        if !self.m_nom.is_square() || !self.kp.is_square() || !self.kd.is_square() {
            return Err(CoreError::DimensionMismatch(
                "controller matrices must be square".into(),
            ));
        }
        if self.kp.nrows() != n || self.kd.nrows() != n {
            return Err(CoreError::DimensionMismatch(
                "gain dimensions do not match the nominal inertia".into(),
            ));
        }
        if self.q_lyap.nrows() != 2 * n || !self.q_lyap.is_square() {
            return Err(CoreError::DimensionMismatch(format!(
                "Q must be {}x{}",
                2 * n,
                2 * n
            )));
        }
        if linalg::min_symmetric_eigenvalue(&linalg::symmetrize(&self.m_nom)) <= 0.0 {
            return Err(CoreError::NotPositiveDefinite(
                "nominal inertia must be positive definite".into(),
            ));
        }
        if self.alpha <= 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "alpha must exceed 1 (got {}); the boundary-layer radius sqrt(eps/(alpha^2-1)) is undefined otherwise",
                self.alpha
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "epsilon must be positive".into(),
            ));
        }
        if self.period <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "control period must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Control input decomposed into its three parts; `total` is their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tde_part: DVector<f64>,
    pub desired_dynamics_part: DVector<f64>,
    pub adaptive_robust_part: DVector<f64>,
    pub total: DVector<f64>,
}

/// Desired-dynamics injection `u0 = ddq_ref + Kd de + Kp e`.
pub fn desired_dynamics(
    qdd_ref: &DVector<f64>,
    err: &ErrorState,
    cfg: &ControllerConfig,
) -> Result<DVector<f64>> {
    if qdd_ref.len() != cfg.dim() || err.dim() != cfg.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "reference dim {}, error dim {}, controller dim {}",
            qdd_ref.len(),
            err.dim(),
            cfg.dim()
        )));
    }
    Ok(qdd_ref + &cfg.kd * &err.de + &cfg.kp * &err.e)
}

/// Sliding variable `s = B' P xi`, i.e. the lower block of `P xi`.
pub fn sliding_variable(p: &DMatrix<f64>, err: &ErrorState) -> Result<DVector<f64>> {
    let n = err.dim();
    if p.nrows() != 2 * n || p.ncols() != 2 * n {
        return Err(CoreError::DimensionMismatch(format!(
            "P is {}x{}, expected {}x{}",
            p.nrows(),
            p.ncols(),
            2 * n,
            2 * n
        )));
    }
    let pxi = p * err.stacked();
    Ok(pxi.rows(n, n).into_owned())
}

/// Chattering-free unit vector `s / sqrt(|s|^2 + eps)`; norm strictly below 1.
pub fn smooth_sign(s: &DVector<f64>, epsilon: f64) -> DVector<f64> {
    s / (s.norm_squared() + epsilon).sqrt()
}

/// Overall switching gain `c = beta0 + beta1 |xi|`.
pub fn switching_gain(gains: &GainEstimates, err: &ErrorState) -> f64 {
    gains.beta0 + gains.beta1 * err.stacked_norm()
}

/// One Euler step of the adaptive law.
///
/// The estimates increase at rates `gamma_j |xi|^j |s|` whenever either one
/// sits at its floor or `s' ds > 0`, and decrease at the same rates otherwise.
/// A decrease step cannot undershoot the floor (it is clamped there), which
/// together with the increase-at-floor branch keeps `beta_j >= floor_j` along
/// any closed-loop sequence. `ds` is formed from the sliding variable of the
/// previous step. Returns the branch taken.
pub fn adapt_gains(
    gains: &mut GainEstimates,
    err: &ErrorState,
    s: &DVector<f64>,
    s_prev: &DVector<f64>,
    dt: f64,
) -> Result<AdaptBranch> {
    if dt <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if s.len() != s_prev.len() {
        return Err(CoreError::DimensionMismatch(
            "sliding variable dimensions differ".into(),
        ));
    }
    let ds = (s - s_prev) / dt;
    let s_dot_ds = s.dot(&ds);
    let at_floor = gains.beta0 <= gains.beta0_min || gains.beta1 <= gains.beta1_min;
    let branch = if at_floor || s_dot_ds > 0.0 {
        AdaptBranch::Increase
    } else {
        AdaptBranch::Decrease
    };

    let xi_norm = err.stacked_norm();
    let s_norm = s.norm();
    match branch {
        AdaptBranch::Increase => {
            gains.beta0 += gains.gamma0 * s_norm * dt;
            gains.beta1 += gains.gamma1 * xi_norm * s_norm * dt;
        }
        AdaptBranch::Decrease => {
            gains.beta0 = (gains.beta0 - gains.gamma0 * s_norm * dt).max(gains.beta0_min);
            gains.beta1 = (gains.beta1 - gains.gamma1 * xi_norm * s_norm * dt).max(gains.beta1_min);
        }
    }
    Ok(branch)
}

/// One Euler step of the scalar ATDE gain law: the gain grows at `gamma0 |s|`
/// while it sits at the floor or `|s|` is increasing, and shrinks at the same
/// rate otherwise; a shrink step is clamped at the floor.
pub fn atde_gain_update(
    c: f64,
    s: &DVector<f64>,
    s_prev_norm: f64,
    gamma0: f64,
    floor: f64,
    dt: f64,
) -> Result<f64> {
    if dt <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let s_norm = s.norm();
    if c <= floor || (s_norm - s_prev_norm) > 0.0 {
        Ok(c + gamma0 * s_norm * dt)
    } else {
        Ok((c - gamma0 * s_norm * dt).max(floor))
    }
}

/// Gain state carried by a controller instance, one arm per variant.
#[derive(Debug, Clone, PartialEq)]
pub enum GainState {
    /// TDC carries no adaptive state.
    None,
    /// ATDE scalar switching gain.
    Scalar { c: f64, floor: f64, gamma0: f64 },
    /// ARTDE gain pair.
    Adaptive(GainEstimates),
}

impl GainState {
    /// The two recorded gain channels: `(beta0, beta1)` for ARTDE, `(c, 0)`
    /// for ATDE and `(0, 0)` for TDC.
    pub fn recorded(&self) -> (f64, f64) {
        match self {
            GainState::None => (0.0, 0.0),
            GainState::Scalar { c, .. } => (*c, 0.0),
            GainState::Adaptive(g) => (g.beta0, g.beta1),
        }
    }
}

/// Composes the full control law for the given variant.
///
/// `s` must be the current sliding variable; `n_hat` the TDE estimate.
/// The parts satisfy `total = tde + desired_dynamics + adaptive_robust`
/// exactly (the sum is formed from the parts, nothing else).
pub fn compute_control(
    cfg: &ControllerConfig,
    err: &ErrorState,
    qdd_ref: &DVector<f64>,
    n_hat: &DVector<f64>,
    s: &DVector<f64>,
    gains: &GainState,
) -> Result<ControlOutput> {
    if n_hat.len() != cfg.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "N_hat dim {} vs controller dim {}",
            n_hat.len(),
            cfg.dim()
        )));
    }
    let u0 = desired_dynamics(qdd_ref, err, cfg)?;
    let du = match (cfg.variant, gains) {
        (Variant::Tdc, _) => DVector::zeros(cfg.dim()),
        (Variant::Atde, GainState::Scalar { c, .. }) => {
            smooth_sign(s, cfg.epsilon) * (cfg.alpha * *c)
        }
        (Variant::Artde, GainState::Adaptive(g)) => {
            let c = switching_gain(g, err);
            smooth_sign(s, cfg.epsilon) * (cfg.alpha * c)
        }
        (variant, state) => {
            return Err(CoreError::InvalidArgument(format!(
                "gain state {state:?} does not match variant {variant:?}"
            )))
        }
    };

    let tde_part = n_hat.clone();
    let desired_dynamics_part = &cfg.m_nom * u0;
    let adaptive_robust_part = &cfg.m_nom * du;
    let total = &tde_part + &desired_dynamics_part + &adaptive_robust_part;
    Ok(ControlOutput {
        tde_part,
        desired_dynamics_part,
        adaptive_robust_part,
        total,
    })
}

/// Radius `phi = sqrt(eps / (alpha^2 - 1))` of the region where the smoothed
/// switching term still dominates; requires `alpha > 1`.
pub fn region_radius(alpha: f64, epsilon: f64) -> Result<f64> {
    if alpha <= 1.0 {
        return Err(CoreError::InvalidArgument(format!(
            "alpha must exceed 1, got {alpha}"
        )));
    }
    if epsilon <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok((epsilon / (alpha * alpha - 1.0)).sqrt())
}

/// Empirically checks the nominal-inertia condition `|I - M(q)^-1 M_nom| < 1`
/// over a set of inertia samples. Returns whether every sample passes, along
/// with the worst spectral norm seen.
pub fn check_nominal_inertia(
    inertia_samples: &[DMatrix<f64>],
    m_nom: &DMatrix<f64>,
) -> Result<(bool, f64)> {
    let n = m_nom.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut worst = 0.0f64;
    for (k, m) in inertia_samples.iter().enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "sample {k} is {}x{}, nominal is {}x{}",
                m.nrows(),
                m.ncols(),
                n,
                n
            )));
        }
        let inv = m.clone().try_inverse().ok_or_else(|| {
            CoreError::Singular(format!("inertia sample {k} is not invertible"))
        })?;
        let norm = spectral_norm(&(&eye - inv * m_nom));
        worst = worst.max(norm);
    }
    Ok((worst < 1.0, worst))
}

/// Self-contained controller instance for one loop: holds the Lyapunov
/// solution, the delay line and the adaptive state, and advances one control
/// period at a time.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    p: DMatrix<f64>,
    delay_line: DelayLine,
    gains: GainState,
    s_prev: DVector<f64>,
    prev_dq: Option<DVector<f64>>,
    last_tau: Option<DVector<f64>>,
    last_t: Option<f64>,
}

/// Everything the step produced, for recording.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub output: ControlOutput,
    pub s: DVector<f64>,
    pub n_hat: DVector<f64>,
    pub gain0: f64,
    pub gain1: f64,
    /// Commanded auxiliary input `u = u0 + du`, for the TDE-error diagnostic.
    pub u: DVector<f64>,
}

impl Controller {
    /// Builds a controller, solving the Lyapunov equation for the sliding
    /// variable and initializing the adaptive state for the variant.
    pub fn new(cfg: ControllerConfig, initial_gains: GainState) -> Result<Self> {
        cfg.validate()?;
        let a = linalg::companion_matrix(&cfg.kp, &cfg.kd)?;
        let p = linalg::lyapunov_solve(&a, &cfg.q_lyap)?;
        let n = cfg.dim();
        match (cfg.variant, &initial_gains) {
            (Variant::Tdc, GainState::None)
            | (Variant::Atde, GainState::Scalar { .. })
            | (Variant::Artde, GainState::Adaptive(_)) => {}
            (v, g) => {
                return Err(CoreError::InvalidArgument(format!(
                    "initial gain state {g:?} does not match variant {v:?}"
                )))
            }
        }
        let delay_line = DelayLine::new(cfg.period, n)?;
        Ok(Self {
            cfg,
            p,
            delay_line,
            gains: initial_gains,
            s_prev: DVector::zeros(n),
            prev_dq: None,
            last_tau: None,
            last_t: None,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn lyapunov_solution(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Runs one control period: adapts the gains, assembles the input.
    pub fn step(&mut self, t: f64, err: &ErrorState, qdd_ref: &DVector<f64>) -> Result<StepOutput> {
        let s = sliding_variable(&self.p, err)?;
        match &mut self.gains {
            GainState::None => {}
            GainState::Scalar { c, floor, gamma0 } => {
                *c = atde_gain_update(*c, &s, self.s_prev.norm(), *gamma0, *floor, self.cfg.period)?;
            }
            GainState::Adaptive(g) => {
                adapt_gains(g, err, &s, &self.s_prev, self.cfg.period)?;
            }
        }
        let n_hat = self.delay_line.estimate_lumped(&self.cfg.m_nom, t)?;
        let output = compute_control(&self.cfg, err, qdd_ref, &n_hat, &s, &self.gains)?;
        let (gain0, gain1) = self.gains.recorded();

        // u = M_nom^-1 (tau - N_hat) = u0 + du, reconstructed from the parts.
        let m_inv = self
            .cfg
            .m_nom
            .clone()
            .try_inverse()
            .ok_or_else(|| CoreError::Singular("nominal inertia".into()))?;
        let u = &m_inv * (&output.desired_dynamics_part + &output.adaptive_robust_part);

        self.s_prev = s.clone();
        self.last_tau = Some(output.total.clone());
        self.last_t = Some(t);
        Ok(StepOutput {
            output,
            s,
            n_hat,
            gain0,
            gain1,
            u,
        })
    }

    /// Feeds back the velocity measured one period after [`Self::step`]; the
    /// difference quotient and the applied input enter the delayed history.
    ///
    /// `tau_applied` is the input the plant actually received (for the
    /// quadrotor position loop this is the realized thrust vector, not the
    /// commanded one).
    pub fn record_applied(
        &mut self,
        dq_now: &DVector<f64>,
        tau_applied: DVector<f64>,
    ) -> Result<()> {
        let t = self.last_t.ok_or_else(|| {
            CoreError::InvalidArgument("record_applied called before any step".into())
        })?;
        let ddq = difference_acceleration(self.prev_dq.as_ref(), dq_now, self.cfg.period)?;
        self.prev_dq = Some(dq_now.clone());
        // Sample keyed at the instant the input was issued; one period later
        // the lookup at t + L retrieves exactly this pair.
        self.delay_line.push(DelaySample {
            t,
            tau: tau_applied,
            ddq,
        })
    }

    /// Observes the initial velocity so the first difference quotient spans
    /// the first period instead of starting from zero.
    pub fn prime_velocity(&mut self, dq: &DVector<f64>) {
        self.prev_dq = Some(dq.clone());
    }
}
