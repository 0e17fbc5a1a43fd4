//! Fixed-step closed-loop executor: RK4 plant integration at `dt`, control
//! with zero-order hold at the period `L`, disturbance and payload events,
//! full trace recording, deterministic under a fixed seed.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{Controller, ControllerConfig, ErrorState, GainEstimates, GainState, Variant};
use crate::error::{CoreError, Result};
use crate::linalg::euler_to_rotation;
use crate::plants::chain::{self, DisturbanceProfile};
use crate::plants::quadrotor::{
    self, attitude_dynamics, desired_attitude, position_dynamics, thrust_from_tau_p,
    QuadrotorParams, QuadrotorState,
};
use crate::sim::config::{
    DisturbanceConfig, EventConfig, LoopTuning, PlantConfig, ScenarioConfig,
};
use crate::sim::trace::{ChannelUnit, ScenarioTrace};

/// One classical RK4 step of `x' = f(t, x)` over `[t, t + dt]`.
pub fn rk4_step<F>(f: &mut F, t: f64, dt: f64, x: &DVector<f64>) -> DVector<f64>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let half = 0.5 * dt;
    let k1 = f(t, x);
    let k2 = f(t + half, &(x + &k1 * half));
    let k3 = f(t + half, &(x + &k2 * half));
    let k4 = f(t + dt, &(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Applies a payload/mass event to the plant parameters. Plant state is
/// untouched: positions and velocities are continuous across the event.
pub fn apply_event(plant: &mut PlantConfig, event: &EventConfig) -> Result<()> {
    match (plant, event) {
        (PlantConfig::Quadrotor(p), EventConfig::DetachPayload { .. }) => {
            p.payload_attached = false;
            Ok(())
        }
        (PlantConfig::Quadrotor(p), EventConfig::AttachPayload { .. }) => {
            p.payload_attached = true;
            Ok(())
        }
        (PlantConfig::Chain(p), EventConfig::ScaleLinkMass { link, factor, .. }) => {
            if *link >= p.dof() {
                return Err(CoreError::InvalidArgument(format!(
                    "link {link} out of range"
                )));
            }
            p.masses[*link] *= factor;
            p.inertias[*link] *= factor;
            Ok(())
        }
        (plant, event) => Err(CoreError::InvalidArgument(format!(
            "event {event:?} does not apply to plant {plant:?}"
        ))),
    }
}

/// Runs one scenario to completion (or divergence) and returns the trace.
pub fn run(config: &ScenarioConfig) -> Result<ScenarioTrace> {
    config.validated()?;
    match &config.plant {
        PlantConfig::Chain(_) => run_chain(config),
        PlantConfig::Quadrotor(_) => run_quadrotor(config),
    }
}

fn loop_config(tuning: &LoopTuning, n: usize, period: f64, variant: Variant) -> ControllerConfig {
    ControllerConfig {
        m_nom: DMatrix::from_diagonal_element(n, n, tuning.m_nom),
        kp: DMatrix::from_diagonal_element(n, n, tuning.kp),
        kd: DMatrix::from_diagonal_element(n, n, tuning.kd),
        q_lyap: DMatrix::from_diagonal_element(2 * n, 2 * n, tuning.q_lyap),
        alpha: tuning.alpha,
        epsilon: tuning.epsilon,
        period,
        variant,
    }
}

fn initial_gains(tuning: &LoopTuning, variant: Variant) -> Result<GainState> {
    Ok(match variant {
        Variant::Tdc => GainState::None,
        Variant::Atde => GainState::Scalar {
            c: tuning.beta0_init.max(tuning.beta0_min),
            floor: tuning.beta0_min,
            gamma0: tuning.gamma0,
        },
        Variant::Artde => GainState::Adaptive(GainEstimates::new(
            tuning.beta0_init,
            tuning.beta1_init,
            tuning.beta0_min,
            tuning.beta1_min,
            tuning.gamma0,
            tuning.gamma1,
        )?),
    })
}

fn build_disturbance_profile(cfg: &DisturbanceConfig, channels: usize) -> DisturbanceProfile {
    let mut profile = DisturbanceProfile::zero(channels);
    if !cfg.bias.is_empty() {
        profile.bias = DVector::from_row_slice(&cfg.bias);
    }
    if !cfg.d0_diag.is_empty() {
        profile.d0 = DMatrix::from_diagonal(&DVector::from_row_slice(&cfg.d0_diag));
    }
    if !cfg.d1_diag.is_empty() {
        profile.d1 = DMatrix::from_diagonal(&DVector::from_row_slice(&cfg.d1_diag));
    }
    profile.impulses = cfg.impulses.clone();
    profile
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Box-Muller standard normal; keeps the RNG dependency surface minimal.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// First-order band-limited noise held constant over each control period.
struct HeldNoise {
    value: Vector3<f64>,
    decay: f64,
    scale: f64,
}

impl HeldNoise {
    fn new(std: f64, corr_time: f64, period: f64) -> Self {
        let decay = if corr_time > 0.0 {
            (-period / corr_time).exp()
        } else {
            0.0
        };
        Self {
            value: Vector3::zeros(),
            decay,
            scale: std * (1.0 - decay * decay).sqrt(),
        }
    }

    fn advance(&mut self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        for i in 0..3 {
            self.value[i] = self.value[i] * self.decay + self.scale * standard_normal(rng);
        }
        self.value
    }
}

/// Critically-damped second-order tracker producing a smooth attitude
/// reference with consistent first and second derivatives from the raw
/// per-step desired angles.
struct RefShaper {
    pos: Vector3<f64>,
    vel: Vector3<f64>,
    omega: f64,
}

impl RefShaper {
    fn new(initial: Vector3<f64>, bandwidth_hz: f64) -> Self {
        Self {
            pos: initial,
            vel: Vector3::zeros(),
            omega: 2.0 * std::f64::consts::PI * bandwidth_hz,
        }
    }

    /// Advances one period toward `target`; returns (pos, vel, acc).
    fn advance(&mut self, target: &Vector3<f64>, dt: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let acc = (target - self.pos) * (self.omega * self.omega) - self.vel * (2.0 * self.omega);
        self.pos += self.vel * dt;
        self.vel += acc * dt;
        (self.pos, self.vel, acc)
    }
}

struct StepCounts {
    steps: usize,
    substeps: usize,
}

fn step_counts(cfg: &ScenarioConfig) -> StepCounts {
    StepCounts {
        steps: (cfg.duration / cfg.control_period).round() as usize,
        substeps: (cfg.control_period / cfg.dt).round() as usize,
    }
}

fn run_chain(cfg: &ScenarioConfig) -> Result<ScenarioTrace> {
    let mut plant = cfg.plant.clone();
    let n = plant.channels();
    let tuning = cfg.controller.joints.as_ref().expect("validated");
    let variant = cfg.controller.variant;
    let mut controller = Controller::new(
        loop_config(tuning, n, cfg.control_period, variant),
        initial_gains(tuning, variant)?,
    )?;
    let profile = build_disturbance_profile(&cfg.disturbance, n);
    let counts = step_counts(cfg);

    let ref0 = cfg.trajectory.sample(0.0);
    let mut q = ref0.pos.clone();
    let mut dq = ref0.vel.clone();
    controller.prime_velocity(&dq);

    let channel_names: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let mut trace = ScenarioTrace::new(
        &cfg.name,
        variant,
        channel_names,
        vec![ChannelUnit::Radian; n],
        vec!["gain0".into(), "gain1".into()],
        vec![],
    );

    let mut pending: Vec<(bool, &EventConfig)> =
        cfg.events.iter().map(|e| (false, e)).collect();

    for k in 0..counts.steps {
        let t = k as f64 * cfg.control_period;

        for (applied, ev) in pending.iter_mut() {
            if !*applied && ev.time() <= t + 1e-12 {
                apply_event(&mut plant, ev)?;
                *applied = true;
            }
        }
        let params = match &plant {
            PlantConfig::Chain(p) => p,
            _ => unreachable!(),
        };

        if !all_finite(&q) || !all_finite(&dq) || dq.norm() > cfg.blowup_limit {
            trace.diverged_at = Some(t);
            break;
        }

        let r = cfg.trajectory.sample(t);
        let err = ErrorState::new(&r.pos - &q, &r.vel - &dq)?;
        let step = controller.step(t, &err, &r.acc)?;
        let tau = step.output.total.clone();

        let d_now = profile.at(t, &q, &dq);
        let ddq_true = chain::chain_dynamics(params, &q, &dq, &tau, &d_now)?;
        let sigma = &ddq_true - &step.u;

        trace.t.push(t);
        trace.q.push(q.clone());
        trace.dq.push(dq.clone());
        trace.reference.push(r.pos.clone());
        trace.e.push(err.e.clone());
        trace.de.push(err.de.clone());
        trace.s.push(step.s.clone());
        trace.n_hat.push(step.n_hat.clone());
        trace.sigma.push(sigma);
        trace.tau_tde.push(step.output.tde_part.clone());
        trace.tau_dd.push(step.output.desired_dynamics_part.clone());
        trace.tau_ar.push(step.output.adaptive_robust_part.clone());
        trace.tau_total.push(tau.clone());
        trace.disturbance.push(d_now);
        trace.gains.push(vec![step.gain0, step.gain1]);
        trace.extras.push(vec![]);

        // Hold tau while integrating the plant through the control period.
        let mut state = DVector::zeros(2 * n);
        state.rows_mut(0, n).copy_from(&q);
        state.rows_mut(n, n).copy_from(&dq);
        let mut deriv = |ts: f64, xs: &DVector<f64>| -> DVector<f64> {
            let qs = xs.rows(0, n).into_owned();
            let dqs = xs.rows(n, n).into_owned();
            let d = profile.at(ts, &qs, &dqs);
            let ddq = chain::chain_dynamics(params, &qs, &dqs, &tau, &d)
                .unwrap_or_else(|_| DVector::from_element(n, f64::NAN));
            let mut out = DVector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&dqs);
            out.rows_mut(n, n).copy_from(&ddq);
            out
        };
        for j in 0..counts.substeps {
            let ts = t + j as f64 * cfg.dt;
            state = rk4_step(&mut deriv, ts, cfg.dt, &state);
        }
        q = state.rows(0, n).into_owned();
        dq = state.rows(n, n).into_owned();

        controller.record_applied(&dq, tau)?;
    }

    Ok(trace)
}

fn vec3(v: &DVector<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn dvec(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_row_slice(v.as_slice())
}

fn stack6(a: &Vector3<f64>, b: &Vector3<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[a.x, a.y, a.z, b.x, b.y, b.z])
}

fn run_quadrotor(cfg: &ScenarioConfig) -> Result<ScenarioTrace> {
    let mut plant = cfg.plant.clone();
    let variant = cfg.controller.variant;
    let pos_tuning = cfg.controller.position.as_ref().expect("validated");
    let att_tuning = cfg.controller.attitude.as_ref().expect("validated");
    let mut outer = Controller::new(
        loop_config(pos_tuning, 3, cfg.control_period, variant),
        initial_gains(pos_tuning, variant)?,
    )?;
    let mut inner = Controller::new(
        loop_config(att_tuning, 3, cfg.control_period, variant),
        initial_gains(att_tuning, variant)?,
    )?;

    let profile = build_disturbance_profile(&cfg.disturbance, 6);
    let counts = step_counts(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut wind_noise = cfg
        .disturbance
        .wind
        .as_ref()
        .map(|w| HeldNoise::new(w.noise_std, w.corr_time, cfg.control_period));
    let mut att_noise = cfg
        .disturbance
        .attitude_noise
        .as_ref()
        .map(|nz| HeldNoise::new(nz.std, nz.corr_time, cfg.control_period));

    let ref0 = cfg.trajectory.sample(0.0);
    let mut state = QuadrotorState {
        p: vec3(&ref0.pos),
        dp: vec3(&ref0.vel),
        q: Vector3::new(0.0, 0.0, ref0.yaw),
        dq: Vector3::zeros(),
    };
    outer.prime_velocity(&dvec(&state.dp));
    inner.prime_velocity(&dvec(&state.dq));

    // Desired-attitude bookkeeping for the inner-loop reference derivatives.
    let mut r_d_prev = euler_to_rotation(0.0, 0.0, ref0.yaw);
    let mut shaper = RefShaper::new(
        Vector3::new(0.0, 0.0, ref0.yaw),
        cfg.controller.attitude_ref_filter_hz,
    );

    let channel_names = ["x", "y", "z", "roll", "pitch", "yaw"]
        .map(String::from)
        .to_vec();
    let units = vec![
        ChannelUnit::Meter,
        ChannelUnit::Meter,
        ChannelUnit::Meter,
        ChannelUnit::Radian,
        ChannelUnit::Radian,
        ChannelUnit::Radian,
    ];
    let mut trace = ScenarioTrace::new(
        &cfg.name,
        variant,
        channel_names,
        units,
        vec![
            "gain0_pos".into(),
            "gain1_pos".into(),
            "gain0_att".into(),
            "gain1_att".into(),
        ],
        vec!["u1".into()],
    );

    let mut pending: Vec<(bool, &EventConfig)> =
        cfg.events.iter().map(|e| (false, e)).collect();

    for k in 0..counts.steps {
        let t = k as f64 * cfg.control_period;

        for (applied, ev) in pending.iter_mut() {
            if !*applied && ev.time() <= t + 1e-12 {
                apply_event(&mut plant, ev)?;
                *applied = true;
            }
        }
        let params: &QuadrotorParams = match &plant {
            PlantConfig::Quadrotor(p) => p,
            _ => unreachable!(),
        };

        let state_vec = stack6(&state.dp, &state.dq);
        if !all_finite(&state_vec)
            || !state.p.iter().chain(state.q.iter()).all(|x| x.is_finite())
            || state.dp.norm() > cfg.blowup_limit
            || state.dq.norm() > cfg.blowup_limit
        {
            trace.diverged_at = Some(t);
            break;
        }

        let r = cfg.trajectory.sample(t);

        // Outer loop: position error, commanded force.
        let e_p = vec3(&r.pos) - state.p;
        let de_p = vec3(&r.vel) - state.dp;
        let err_p = ErrorState::new(dvec(&e_p), dvec(&de_p))?;
        let outer_step = outer.step(t, &err_p, &dvec(&vec3(&r.acc)))?;
        let tau_p = vec3(&outer_step.output.total);

        // Co-design glue: thrust extraction and desired attitude.
        let rot = state.rotation();
        let u1 = thrust_from_tau_p(&tau_p, &rot);
        let r_d = match desired_attitude(&tau_p, r.yaw) {
            Ok(rd) => {
                r_d_prev = rd;
                rd
            }
            // Degenerate commanded force (start-up or free fall): hold the
            // previous desired attitude rather than aborting the run.
            Err(_) => r_d_prev,
        };
        let (roll_d, pitch_d, _) = r_d.to_euler();
        let q_d_raw = Vector3::new(roll_d, pitch_d, r.yaw);
        let (q_d, dq_d, ddq_d) = shaper.advance(&q_d_raw, cfg.control_period);
        let r_d = euler_to_rotation(q_d.x, q_d.y, q_d.z);

        // Inner loop: rotation-matrix attitude error. The geometric error is
        // positive when the actual attitude leads the desired one, so the
        // reference-minus-actual convention used by the control law takes the
        // negative of both components.
        let (e_q_raw, de_q_raw) = quadrotor::attitude_error(&r_d, &rot, &state.dq, &dq_d);
        let err_q = ErrorState::new(dvec(&-e_q_raw), dvec(&-de_q_raw))?;
        let inner_step = inner.step(t, &err_q, &dvec(&ddq_d))?;
        let tau_q = vec3(&inner_step.output.total);

        // Realized world-frame force: thrust is produced along the body z
        // axis only; lateral components of the command are lost until the
        // attitude catches up.
        let realized_force = rot.z_axis() * u1;

        let structured = profile.at(t, &stack6(&state.p, &state.q), &state_vec);
        let wind_held = wind_noise
            .as_mut()
            .map(|n| n.advance(&mut rng))
            .unwrap_or_else(Vector3::zeros);
        let att_held = att_noise
            .as_mut()
            .map(|n| n.advance(&mut rng))
            .unwrap_or_else(Vector3::zeros);

        let d_p_now = disturbance_position(cfg, params, &structured, &wind_held, state.p.z);
        let d_q_now = disturbance_attitude(&structured, &att_held);

        let ddp_true = position_dynamics(params, &realized_force, &d_p_now);
        let ddq_true = attitude_dynamics(params, &state, &tau_q, &d_q_now)
            .unwrap_or_else(|_| Vector3::from_element(f64::NAN));
        let sigma_p = ddp_true - vec3(&outer_step.u);
        let sigma_q = ddq_true - vec3(&inner_step.u);

        trace.t.push(t);
        trace.q.push(stack6(&state.p, &state.q));
        trace.dq.push(state_vec.clone());
        trace.reference.push(stack6(&vec3(&r.pos), &q_d));
        trace.e.push(stack6(&e_p, &vec3(&err_q.e)));
        trace.de.push(stack6(&de_p, &vec3(&err_q.de)));
        trace
            .s
            .push(stack6(&vec3(&outer_step.s), &vec3(&inner_step.s)));
        trace
            .n_hat
            .push(stack6(&vec3(&outer_step.n_hat), &vec3(&inner_step.n_hat)));
        trace.sigma.push(stack6(&sigma_p, &sigma_q));
        trace.tau_tde.push(stack6(
            &vec3(&outer_step.output.tde_part),
            &vec3(&inner_step.output.tde_part),
        ));
        trace.tau_dd.push(stack6(
            &vec3(&outer_step.output.desired_dynamics_part),
            &vec3(&inner_step.output.desired_dynamics_part),
        ));
        trace.tau_ar.push(stack6(
            &vec3(&outer_step.output.adaptive_robust_part),
            &vec3(&inner_step.output.adaptive_robust_part),
        ));
        trace.tau_total.push(stack6(&tau_p, &tau_q));
        trace.disturbance.push(stack6(&d_p_now, &d_q_now));
        trace.gains.push(vec![
            outer_step.gain0,
            outer_step.gain1,
            inner_step.gain0,
            inner_step.gain1,
        ]);
        trace.extras.push(vec![u1]);

        // Integrate the 12-state plant with (u1, tau_q) held.
        let mut x = DVector::zeros(12);
        x.rows_mut(0, 3).copy_from(&dvec(&state.p));
        x.rows_mut(3, 3).copy_from(&dvec(&state.dp));
        x.rows_mut(6, 3).copy_from(&dvec(&state.q));
        x.rows_mut(9, 3).copy_from(&dvec(&state.dq));
        let mut deriv = |ts: f64, xs: &DVector<f64>| -> DVector<f64> {
            let p_s = Vector3::new(xs[0], xs[1], xs[2]);
            let dp_s = Vector3::new(xs[3], xs[4], xs[5]);
            let q_s = Vector3::new(xs[6], xs[7], xs[8]);
            let dq_s = Vector3::new(xs[9], xs[10], xs[11]);
            let rot_s = euler_to_rotation(q_s.x, q_s.y, q_s.z);
            let force = rot_s.z_axis() * u1;
            let structured_s = profile.at(ts, &stack6(&p_s, &q_s), &stack6(&dp_s, &dq_s));
            let d_p = disturbance_position(cfg, params, &structured_s, &wind_held, p_s.z);
            let d_q = disturbance_attitude(&structured_s, &att_held);
            let ddp = position_dynamics(params, &force, &d_p);
            let st = QuadrotorState {
                p: p_s,
                dp: dp_s,
                q: q_s,
                dq: dq_s,
            };
            let ddq = attitude_dynamics(params, &st, &tau_q, &d_q)
                .unwrap_or_else(|_| Vector3::from_element(f64::NAN));
            let mut out = DVector::zeros(12);
            out.rows_mut(0, 3).copy_from(&dvec(&dp_s));
            out.rows_mut(3, 3).copy_from(&dvec(&ddp));
            out.rows_mut(6, 3).copy_from(&dvec(&dq_s));
            out.rows_mut(9, 3).copy_from(&dvec(&ddq));
            out
        };
        for j in 0..counts.substeps {
            let ts = t + j as f64 * cfg.dt;
            x = rk4_step(&mut deriv, ts, cfg.dt, &x);
        }
        state.p = Vector3::new(x[0], x[1], x[2]);
        state.dp = Vector3::new(x[3], x[4], x[5]);
        state.q = Vector3::new(x[6], x[7], x[8]);
        state.dq = Vector3::new(x[9], x[10], x[11]);

        outer.record_applied(&dvec(&state.dp), dvec(&realized_force))?;
        inner.record_applied(&dvec(&state.dq), dvec(&tau_q))?;
    }

    Ok(trace)
}

fn disturbance_position(
    cfg: &ScenarioConfig,
    params: &QuadrotorParams,
    structured: &DVector<f64>,
    wind_held: &Vector3<f64>,
    z: f64,
) -> Vector3<f64> {
    let mut d = Vector3::new(structured[0], structured[1], structured[2]);
    if let Some(w) = &cfg.disturbance.wind {
        d += Vector3::from(w.bias) + wind_held;
        if w.ground_coeff != 0.0 {
            // Displaced propeller wash pushes up when close to the ground.
            let _ = params;
            d.z -= w.ground_coeff / (z.max(0.0) + w.ground_z0);
        }
    }
    d
}

fn disturbance_attitude(structured: &DVector<f64>, att_held: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(structured[3], structured[4], structured[5]) + att_held
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::chain::ChainParams;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn rk4_fourth_order_on_linear_oscillator() {
        // x'' = -w^2 x with closed form x = cos(w t); halving dt shrinks the
        // error by ~16.
        let omega = 2.0;
        let mut f = |_t: f64, x: &DVector<f64>| {
            DVector::from_row_slice(&[x[1], -omega * omega * x[0]])
        };
        let mut run = |dt: f64| {
            let mut x = DVector::from_row_slice(&[1.0, 0.0]);
            let steps = (5.0 / dt).round() as usize;
            for k in 0..steps {
                x = rk4_step(&mut f, k as f64 * dt, dt, &x);
            }
            (x[0] - (omega * 5.0).cos()).abs()
        };
        let e1 = run(0.01);
        let e2 = run(0.005);
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn equilibrium_hold_keeps_zero_error() {
        // Chain held at its hanging rest: controller sees zero error forever.
        let mut cfg = presets::load("chain-s1").unwrap();
        cfg.duration = 0.5;
        cfg.disturbance = Default::default();
        cfg.events.clear();
        cfg.trajectory = crate::trajectory::TrajectorySpec::Hold {
            position: vec![0.0, 0.0],
        };
        let trace = run(&cfg).unwrap();
        assert!(trace.diverged_at.is_none());
        let worst = (0..trace.len())
            .map(|k| trace.e[k].norm())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "max |e| = {worst}");
    }

    #[test]
    fn quadrotor_hover_settles_with_tdc() {
        let mut cfg = presets::load("quad-infinity").unwrap();
        cfg.duration = 5.0;
        cfg.controller.variant = Variant::Tdc;
        cfg.disturbance = Default::default();
        cfg.events.clear();
        if let PlantConfig::Quadrotor(q) = &mut cfg.plant {
            q.payload_attached = false;
        }
        cfg.trajectory = crate::trajectory::TrajectorySpec::Hold {
            position: vec![0.0, 0.0, 1.0],
        };
        let trace = run(&cfg).unwrap();
        assert!(trace.diverged_at.is_none());
        let last = trace.len() - 1;
        let pos_err = trace.e[last].rows(0, 3).norm();
        assert!(pos_err < 1e-3, "hover position error {pos_err}");
    }

    #[test]
    fn identical_seed_gives_bit_identical_traces() {
        let mut cfg = presets::load("quad-infinity").unwrap();
        cfg.duration = 2.0;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn recorded_sigma_matches_acceleration_minus_aux_input() {
        // sigma = ddq - u: reconstruct u from the recorded decomposition and
        // ddq from the plant at the recorded state/input/disturbance.
        let mut cfg = presets::load("chain-s2").unwrap();
        cfg.duration = 1.0;
        let trace = run(&cfg).unwrap();
        let (params, tuning) = match (&cfg.plant, &cfg.controller.joints) {
            (PlantConfig::Chain(p), Some(t)) => (p.clone(), t),
            _ => unreachable!(),
        };
        // The S2 preset scales the distal link mass at t = 0.
        let mut params = params;
        for ev in &cfg.events {
            if let EventConfig::ScaleLinkMass { t, link, factor } = ev {
                if *t <= 0.0 {
                    params.masses[*link] *= factor;
                    params.inertias[*link] *= factor;
                }
            }
        }
        for k in (0..trace.len()).step_by(97) {
            let ddq = chain::chain_dynamics(
                &params,
                &trace.q[k],
                &trace.dq[k],
                &trace.tau_total[k],
                &trace.disturbance[k],
            )
            .unwrap();
            let u = (&trace.tau_dd[k] + &trace.tau_ar[k]) / tuning.m_nom;
            let sigma = ddq - u;
            assert!(
                (&sigma - &trace.sigma[k]).norm() < 1e-6,
                "step {k}: {} vs {}",
                sigma,
                trace.sigma[k]
            );
        }
    }

    #[test]
    fn apply_event_cases() {
        let mut plant = PlantConfig::Quadrotor(QuadrotorParams {
            mass: 1.4,
            body_inertia: [0.02, 0.02, 0.035],
            gravity: 9.81,
            payload_mass: 0.35,
            payload_attached: true,
            attitude_model: quadrotor::AttitudeModel::Full,
        });
        apply_event(&mut plant, &EventConfig::DetachPayload { t: 35.0 }).unwrap();
        if let PlantConfig::Quadrotor(p) = &plant {
            assert_relative_eq!(p.effective_mass(), 1.4);
        }

        let mut chain_plant = PlantConfig::Chain(ChainParams {
            masses: vec![1.0, 0.8],
            lengths: vec![0.5, 0.4],
            com_offsets: vec![0.25, 0.2],
            inertias: vec![0.05, 0.05],
            viscous_friction: vec![0.0, 0.0],
            gravity: 9.81,
        });
        apply_event(
            &mut chain_plant,
            &EventConfig::ScaleLinkMass {
                t: 0.0,
                link: 1,
                factor: 1.15,
            },
        )
        .unwrap();
        if let PlantConfig::Chain(p) = &chain_plant {
            assert_relative_eq!(p.masses[1], 0.92, epsilon = 1e-12);
        }

        // Mismatched combinations are rejected.
        assert!(apply_event(&mut chain_plant, &EventConfig::DetachPayload { t: 0.0 }).is_err());
    }

    #[test]
    fn zero_order_hold_is_exact() {
        // tau recorded at step k is the input over [kL, (k+1)L); re-running
        // the plant integration with that constant must land on the next
        // recorded state.
        let mut cfg = presets::load("chain-s1").unwrap();
        cfg.duration = 0.05;
        cfg.disturbance.impulses.clear();
        let trace = run(&cfg).unwrap();
        let params = match &cfg.plant {
            PlantConfig::Chain(p) => p.clone(),
            _ => unreachable!(),
        };
        let n = params.dof();
        let profile = build_disturbance_profile(&cfg.disturbance, n);
        let k = 10;
        let tau = trace.tau_total[k].clone();
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(&trace.q[k]);
        x.rows_mut(n, n).copy_from(&trace.dq[k]);
        let mut deriv = |ts: f64, xs: &DVector<f64>| {
            let qs = xs.rows(0, n).into_owned();
            let dqs = xs.rows(n, n).into_owned();
            let d = profile.at(ts, &qs, &dqs);
            let ddq = chain::chain_dynamics(&params, &qs, &dqs, &tau, &d).unwrap();
            let mut out = DVector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&dqs);
            out.rows_mut(n, n).copy_from(&ddq);
            out
        };
        let substeps = (cfg.control_period / cfg.dt).round() as usize;
        for j in 0..substeps {
            let ts = trace.t[k] + j as f64 * cfg.dt;
            x = rk4_step(&mut deriv, ts, cfg.dt, &x);
        }
        assert!((x.rows(0, n) - &trace.q[k + 1]).norm() < 1e-14);
        assert!((x.rows(n, n) - &trace.dq[k + 1]).norm() < 1e-14);
    }
}
