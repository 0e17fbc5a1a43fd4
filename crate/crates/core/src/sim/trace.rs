//! Scenario trace: everything recorded at each control step, on a uniform
//! grid at the control period, plus CSV serialization.

use nalgebra::DVector;

use crate::controller::Variant;

/// Physical unit of a trace channel; decides degree conversion at the
/// reporting boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelUnit {
    Meter,
    Radian,
}

impl ChannelUnit {
    pub fn error_label(&self) -> &'static str {
        match self {
            ChannelUnit::Meter => "m",
            ChannelUnit::Radian => "deg",
        }
    }

    pub fn control_label(&self) -> &'static str {
        match self {
            ChannelUnit::Meter => "N",
            ChannelUnit::Radian => "Nm",
        }
    }
}

/// Time series of one closed-loop run. All per-channel vectors have one entry
/// per control step; `gains` and `extras` are scalar columns.
#[derive(Debug, Clone)]
pub struct ScenarioTrace {
    pub scenario: String,
    pub variant: Variant,
    pub channel_names: Vec<String>,
    pub channel_units: Vec<ChannelUnit>,
    pub t: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub dq: Vec<DVector<f64>>,
    pub reference: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub de: Vec<DVector<f64>>,
    pub s: Vec<DVector<f64>>,
    pub n_hat: Vec<DVector<f64>>,
    pub sigma: Vec<DVector<f64>>,
    pub tau_tde: Vec<DVector<f64>>,
    pub tau_dd: Vec<DVector<f64>>,
    pub tau_ar: Vec<DVector<f64>>,
    pub tau_total: Vec<DVector<f64>>,
    pub disturbance: Vec<DVector<f64>>,
    pub gain_names: Vec<String>,
    pub gains: Vec<Vec<f64>>,
    pub extra_names: Vec<String>,
    pub extras: Vec<Vec<f64>>,
    /// Set when the divergence detector stopped the run.
    pub diverged_at: Option<f64>,
}

impl ScenarioTrace {
    pub fn new(
        scenario: &str,
        variant: Variant,
        channel_names: Vec<String>,
        channel_units: Vec<ChannelUnit>,
        gain_names: Vec<String>,
        extra_names: Vec<String>,
    ) -> Self {
        Self {
            scenario: scenario.to_string(),
            variant,
            channel_names,
            channel_units,
            t: Vec::new(),
            q: Vec::new(),
            dq: Vec::new(),
            reference: Vec::new(),
            e: Vec::new(),
            de: Vec::new(),
            s: Vec::new(),
            n_hat: Vec::new(),
            sigma: Vec::new(),
            tau_tde: Vec::new(),
            tau_dd: Vec::new(),
            tau_ar: Vec::new(),
            tau_total: Vec::new(),
            disturbance: Vec::new(),
            gain_names,
            gains: Vec::new(),
            extra_names,
            extras: Vec::new(),
            diverged_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    /// Stacked error norm `|xi| = sqrt(|e|^2 + |de|^2)` at step `k`.
    pub fn xi_norm(&self, k: usize) -> f64 {
        (self.e[k].norm_squared() + self.de[k].norm_squared()).sqrt()
    }

    pub fn sigma_norm(&self, k: usize) -> f64 {
        self.sigma[k].norm()
    }

    /// Header and one row per control step; floats are printed in Rust's
    /// shortest round-trip form, so re-reading loses no precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push('t');
        let groups: [(&str, &Vec<DVector<f64>>); 13] = [
            ("q", &self.q),
            ("dq", &self.dq),
            ("ref", &self.reference),
            ("e", &self.e),
            ("de", &self.de),
            ("s", &self.s),
            ("nhat", &self.n_hat),
            ("sigma", &self.sigma),
            ("tau_tde", &self.tau_tde),
            ("tau_dd", &self.tau_dd),
            ("tau_ar", &self.tau_ar),
            ("tau", &self.tau_total),
            ("dist", &self.disturbance),
        ];
        for (prefix, _) in &groups {
            for name in &self.channel_names {
                out.push(',');
                out.push_str(prefix);
                out.push('_');
                out.push_str(name);
            }
        }
        for g in &self.gain_names {
            out.push(',');
            out.push_str(g);
        }
        for x in &self.extra_names {
            out.push(',');
            out.push_str(x);
        }
        out.push('\n');

        for k in 0..self.len() {
            push_float(&mut out, self.t[k]);
            for (_, series) in &groups {
                for v in series[k].iter() {
                    out.push(',');
                    push_float(&mut out, *v);
                }
            }
            for g in &self.gains[k] {
                out.push(',');
                push_float(&mut out, *g);
            }
            for x in &self.extras[k] {
                out.push(',');
                push_float(&mut out, *x);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

fn push_float(out: &mut String, v: f64) {
    use std::fmt::Write;
    write!(out, "{v}").expect("write to string");
}
