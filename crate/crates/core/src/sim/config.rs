//! Scenario configuration schema, TOML parsing, dotted-path overrides and
//! full validation with every violation collected.

use serde::{Deserialize, Serialize};

use crate::controller::Variant;
use crate::error::{CoreError, Result};
use crate::plants::chain::{ChainParams, ImpulseEvent};
use crate::plants::quadrotor::QuadrotorParams;
use crate::trajectory::TrajectorySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Total simulated time, s.
    pub duration: f64,
    /// Physics integration step, s.
    pub dt: f64,
    /// Controller period and artificial delay L, s; must be a multiple of dt.
    pub control_period: f64,
    pub seed: u64,
    /// Velocity norm that trips the divergence detector.
    #[serde(default = "default_blowup")]
    pub blowup_limit: f64,
    pub plant: PlantConfig,
    pub controller: ControlSection,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub events: Vec<EventConfig>,
}

fn default_blowup() -> f64 {
    1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Chain(ChainParams),
    Quadrotor(QuadrotorParams),
}

impl PlantConfig {
    /// Number of controlled channels (joints, or 3 position + 3 attitude).
    pub fn channels(&self) -> usize {
        match self {
            PlantConfig::Chain(p) => p.dof(),
            PlantConfig::Quadrotor(_) => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Chain joint-space loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<LoopTuning>,
    /// Quadrotor outer (position) loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<LoopTuning>,
    /// Quadrotor inner (attitude) loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude: Option<LoopTuning>,
    /// Bandwidth of the critically-damped shaping filter applied to the
    /// desired-attitude angles before differentiation (quadrotor only).
    /// Without it, the finite-difference reference derivatives amplify the
    /// switching content of the commanded force by 1/L^2.
    #[serde(default = "default_att_filter_hz")]
    pub attitude_ref_filter_hz: f64,
}

fn default_att_filter_hz() -> f64 {
    2.0
}

fn default_variant() -> Variant {
    Variant::Artde
}

/// Tunables of one control loop. Gains are scalar multiples of the identity,
/// matching how the experiments report them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopTuning {
    /// Nominal inertia `M_nom = m_nom I`.
    pub m_nom: f64,
    pub kp: f64,
    pub kd: f64,
    #[serde(default = "one")]
    pub q_lyap: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub gamma0: f64,
    #[serde(default = "one")]
    pub gamma1: f64,
    #[serde(default = "default_floor")]
    pub beta0_min: f64,
    #[serde(default = "default_floor")]
    pub beta1_min: f64,
    #[serde(default = "default_floor")]
    pub beta0_init: f64,
    #[serde(default = "default_floor")]
    pub beta1_init: f64,
}

fn one() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    4.0
}

fn default_epsilon() -> f64 {
    5e-5
}

fn default_floor() -> f64 {
    0.01
}

/// Disturbance configuration. The structured terms (`bias`, `d0_diag`,
/// `d1_diag`, `impulses`) act on the full channel vector; wind and attitude
/// noise apply to the quadrotor only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bias: Vec<f64>,
    /// Diagonal of the position-proportional coefficient matrix D0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d0_diag: Vec<f64>,
    /// Diagonal of the quadratic velocity coefficient matrix D1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d1_diag: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impulses: Vec<ImpulseEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind: Option<WindConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude_noise: Option<NoiseConfig>,
}

/// Wind force on the quadrotor: constant bias, band-limited noise held over
/// each control period, and a near-ground term `ground_coeff / (z + ground_z0)`
/// pushing along +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindConfig {
    pub bias: [f64; 3],
    pub noise_std: f64,
    pub corr_time: f64,
    #[serde(default)]
    pub ground_coeff: f64,
    #[serde(default = "default_ground_z0")]
    pub ground_z0: f64,
}

fn default_ground_z0() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub std: f64,
    pub corr_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventConfig {
    /// Quadrotor drops its payload (stepwise mass/inertia change).
    DetachPayload { t: f64 },
    AttachPayload { t: f64 },
    /// Chain link mass (and inertia) scaled by `factor`.
    ScaleLinkMass { t: f64, link: usize, factor: f64 },
}

impl EventConfig {
    pub fn time(&self) -> f64 {
        match self {
            EventConfig::DetachPayload { t }
            | EventConfig::AttachPayload { t }
            | EventConfig::ScaleLinkMass { t, .. } => *t,
        }
    }
}

impl ScenarioConfig {
    /// Parses TOML, returning every syntax/schema error.
    pub fn from_toml_str(s: &str) -> std::result::Result<Self, Vec<String>> {
        toml::from_str(s).map_err(|e| vec![e.to_string()])
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CoreError::Config(e.to_string()))
    }

    /// Full schema check including cross-field rules; all violations are
    /// collected rather than failing on the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.duration <= 0.0 {
            errs.push(format!("duration must be positive, got {}", self.duration));
        }
        if self.dt <= 0.0 {
            errs.push(format!("dt must be positive, got {}", self.dt));
        }
        if self.control_period <= 0.0 {
            errs.push(format!(
                "control_period must be positive, got {}",
                self.control_period
            ));
        }
        if self.dt > 0.0 && self.control_period > 0.0 {
            if self.dt > self.control_period {
                errs.push(format!(
                    "dt ({}) must not exceed control_period ({})",
                    self.dt, self.control_period
                ));
            }
            let ratio = self.control_period / self.dt;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                errs.push(format!(
                    "control_period ({}) must be an integer multiple of dt ({})",
                    self.control_period, self.dt
                ));
            }
        }
        if self.blowup_limit <= 0.0 {
            errs.push("blowup_limit must be positive".into());
        }

        match &self.plant {
            PlantConfig::Chain(p) => {
                if let Err(e) = p.validate() {
                    errs.push(format!("plant.chain: {e}"));
                }
                if self.controller.joints.is_none() {
                    errs.push("controller.joints is required for the chain plant".into());
                }
                if self.controller.position.is_some() || self.controller.attitude.is_some() {
                    errs.push(
                        "controller.position/attitude do not apply to the chain plant".into(),
                    );
                }
                if self.trajectory.dim() != p.dof() {
                    errs.push(format!(
                        "trajectory dimension {} does not match chain dof {}",
                        self.trajectory.dim(),
                        p.dof()
                    ));
                }
                for ev in &self.events {
                    match ev {
                        EventConfig::ScaleLinkMass { link, factor, .. } => {
                            if *link >= p.dof() {
                                errs.push(format!(
                                    "events: link {link} out of range for {}-dof chain",
                                    p.dof()
                                ));
                            }
                            if *factor <= 0.0 {
                                errs.push("events: mass scale factor must be positive".into());
                            }
                        }
                        other => errs.push(format!(
                            "events: {other:?} does not apply to the chain plant"
                        )),
                    }
                }
            }
            PlantConfig::Quadrotor(p) => {
                if let Err(e) = p.validate() {
                    errs.push(format!("plant.quadrotor: {e}"));
                }
                if self.controller.position.is_none() {
                    errs.push("controller.position is required for the quadrotor".into());
                }
                if self.controller.attitude.is_none() {
                    errs.push("controller.attitude is required for the quadrotor".into());
                }
                if self.controller.joints.is_some() {
                    errs.push("controller.joints does not apply to the quadrotor".into());
                }
                if self.trajectory.dim() != 3 {
                    errs.push(format!(
                        "trajectory dimension {} must be 3 for the quadrotor",
                        self.trajectory.dim()
                    ));
                }
                for ev in &self.events {
                    if let EventConfig::ScaleLinkMass { .. } = ev {
                        errs.push("events: scale_link_mass does not apply to the quadrotor".into());
                    }
                }
            }
        }

        for (label, tuning) in [
            ("joints", &self.controller.joints),
            ("position", &self.controller.position),
            ("attitude", &self.controller.attitude),
        ] {
            if let Some(t) = tuning {
                for err in t.validate() {
                    errs.push(format!("controller.{label}: {err}"));
                }
            }
        }
        if self.controller.attitude_ref_filter_hz <= 0.0 {
            errs.push("controller.attitude_ref_filter_hz must be positive".into());
        }

        if let Err(e) = self.trajectory.validate() {
            errs.push(format!("trajectory: {e}"));
        }

        let channels = self.plant.channels();
        for (name, v) in [
            ("bias", &self.disturbance.bias),
            ("d0_diag", &self.disturbance.d0_diag),
            ("d1_diag", &self.disturbance.d1_diag),
        ] {
            if !v.is_empty() && v.len() != channels {
                errs.push(format!(
                    "disturbance.{name} has {} entries, plant has {channels} channels",
                    v.len()
                ));
            }
        }
        for (k, imp) in self.disturbance.impulses.iter().enumerate() {
            if let Err(e) = imp.validate(channels) {
                errs.push(format!("disturbance.impulses[{k}]: {e}"));
            }
        }
        if matches!(self.plant, PlantConfig::Chain(_))
            && (self.disturbance.wind.is_some() || self.disturbance.attitude_noise.is_some())
        {
            errs.push("disturbance.wind/attitude_noise apply to the quadrotor only".into());
        }

        errs
    }

    /// Validation as a single error, for call sites that just need to fail.
    pub fn validated(&self) -> Result<&Self> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(CoreError::Config(errs.join("; ")))
        }
    }
}

impl LoopTuning {
    fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.m_nom <= 0.0 {
            errs.push("m_nom must be positive (nominal inertia is positive definite)".into());
        }
        if self.kp <= 0.0 || self.kd <= 0.0 {
            errs.push("kp and kd must be positive definite (positive scalars)".into());
        }
        if self.q_lyap <= 0.0 {
            errs.push("q_lyap must be positive".into());
        }
        if self.alpha <= 1.0 {
            errs.push(format!(
                "alpha must exceed 1 (got {}): the switching region radius sqrt(epsilon/(alpha^2-1)) requires it",
                self.alpha
            ));
        }
        if self.epsilon <= 0.0 {
            errs.push("epsilon must be positive".into());
        }
        if self.gamma0 <= 0.0 || self.gamma1 <= 0.0 {
            errs.push("adaptation rates gamma0/gamma1 must be positive".into());
        }
        if self.beta0_min <= 0.0 || self.beta1_min <= 0.0 {
            errs.push("gain floors must be positive".into());
        }
        if self.beta0_init < self.beta0_min || self.beta1_init < self.beta1_min {
            errs.push("initial gains must start at or above their floors".into());
        }
        errs
    }
}

/// Applies one `key=value` override onto a parsed TOML document using a
/// dotted path (`controller.joints.alpha=6`). Array indices are numeric path
/// segments. Values parse as bool, integer, float, then string.
pub fn apply_override(doc: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let mut node = doc;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if last {
            let parsed = parse_scalar(raw);
            match node {
                toml::Value::Table(t) => {
                    t.insert(seg.to_string(), parsed);
                    return Ok(());
                }
                toml::Value::Array(a) => {
                    let idx: usize = seg.parse().map_err(|_| {
                        CoreError::Config(format!("override '{key}': '{seg}' is not an index"))
                    })?;
                    if idx >= a.len() {
                        return Err(CoreError::Config(format!(
                            "override '{key}': index {idx} out of bounds"
                        )));
                    }
                    a[idx] = parsed;
                    return Ok(());
                }
                _ => {
                    return Err(CoreError::Config(format!(
                        "override '{key}': '{seg}' cannot be set on a scalar"
                    )))
                }
            }
        }
        node = match node {
            toml::Value::Table(t) => t
                .entry(seg.to_string())
                .or_insert(toml::Value::Table(Default::default())),
            toml::Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| {
                    CoreError::Config(format!("override '{key}': '{seg}' is not an index"))
                })?;
                a.get_mut(idx).ok_or_else(|| {
                    CoreError::Config(format!("override '{key}': index {idx} out of bounds"))
                })?
            }
            _ => {
                return Err(CoreError::Config(format!(
                    "override '{key}': cannot descend into scalar at '{seg}'"
                )))
            }
        };
    }
    Err(CoreError::Config(format!("override '{key}': empty path")))
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}
