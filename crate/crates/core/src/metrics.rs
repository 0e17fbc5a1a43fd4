//! Comparison statistics over scenario traces: per-channel RMS error, maximum
//! absolute error and RMS control effort, percentage-improvement tables and
//! report emission (CSV and fixed-width text).
//!
//! Angles are kept in radians internally; conversion to degrees happens only
//! when a report is rendered.

use crate::error::{CoreError, Result};
use crate::sim::trace::{ChannelUnit, ScenarioTrace};

/// Per-channel statistics over a window of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub channel: String,
    pub unit: ChannelUnit,
    pub rms_error: f64,
    pub max_abs_error: f64,
    pub rms_control: f64,
}

/// Window over trace time, `[start, end)`. Use an infinite end to close the
/// final phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn all() -> Self {
        Self {
            start: 0.0,
            end: f64::INFINITY,
        }
    }

    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// RMS and maximum-absolute statistics of the error and control columns over
/// the window (whole trace when `None`).
pub fn channel_stats(trace: &ScenarioTrace, window: Option<Window>) -> Result<Vec<ChannelStats>> {
    let window = window.unwrap_or_else(Window::all);
    let idx: Vec<usize> = (0..trace.len())
        .filter(|&k| window.contains(trace.t[k]))
        .collect();
    if idx.is_empty() {
        return Err(CoreError::InvalidArgument(format!(
            "window [{}, {}) selects no samples",
            window.start, window.end
        )));
    }
    let n = trace.channels();
    let mut stats = Vec::with_capacity(n);
    for ch in 0..n {
        let mut sq_err = 0.0;
        let mut max_abs = 0.0f64;
        let mut sq_ctl = 0.0;
        for &k in &idx {
            let e = trace.e[k][ch];
            sq_err += e * e;
            max_abs = max_abs.max(e.abs());
            let u = trace.tau_total[k][ch];
            sq_ctl += u * u;
        }
        let count = idx.len() as f64;
        stats.push(ChannelStats {
            channel: trace.channel_names[ch].clone(),
            unit: trace.channel_units[ch],
            rms_error: (sq_err / count).sqrt(),
            max_abs_error: max_abs,
            rms_control: (sq_ctl / count).sqrt(),
        });
    }
    Ok(stats)
}

/// Percentage improvement of `proposed` over `baseline`,
/// `100 (baseline - proposed) / baseline`; `None` when the baseline is zero.
pub fn improvement_pct(baseline: f64, proposed: f64) -> Option<f64> {
    if baseline == 0.0 {
        None
    } else {
        Some(100.0 * (baseline - proposed) / baseline)
    }
}

/// Per-channel improvement of every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub channel: String,
    pub rms_error: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub rms_control: Option<f64>,
}

pub fn improvement_table(
    baseline: &[ChannelStats],
    proposed: &[ChannelStats],
) -> Result<Vec<ImprovementRow>> {
    if baseline.len() != proposed.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "baseline has {} channels, proposed {}",
            baseline.len(),
            proposed.len()
        )));
    }
    baseline
        .iter()
        .zip(proposed)
        .map(|(b, p)| {
            if b.channel != p.channel {
                return Err(CoreError::DimensionMismatch(format!(
                    "channel mismatch: {} vs {}",
                    b.channel, p.channel
                )));
            }
            Ok(ImprovementRow {
                channel: b.channel.clone(),
                rms_error: improvement_pct(b.rms_error, p.rms_error),
                max_abs_error: improvement_pct(b.max_abs_error, p.max_abs_error),
                rms_control: improvement_pct(b.rms_control, p.rms_control),
            })
        })
        .collect()
}

/// One run's entry in a report: its stats, or the divergence marker.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: String,
    pub variant: String,
    pub stats: Vec<ChannelStats>,
    pub diverged_at: Option<f64>,
    /// Fitted affine majorant of |sigma| against |xi| (diagnostic).
    pub sigma_bound: Option<(f64, f64)>,
}

impl RunSummary {
    pub fn from_trace(trace: &ScenarioTrace) -> Result<Self> {
        Ok(Self {
            scenario: trace.scenario.clone(),
            variant: trace.variant.label().to_string(),
            stats: channel_stats(trace, None)?,
            diverged_at: trace.diverged_at,
            sigma_bound: fit_sigma_bound(trace),
        })
    }
}

/// Fits `(b0, b1)` with `|sigma| <= b0 + b1 |xi|` over every recorded step:
/// least-squares slope clamped nonnegative, then the offset raised until no
/// sample violates the bound (zero violation by construction).
pub fn fit_affine_majorant(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.is_empty() || points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in points {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    let slope = if var > 0.0 { (cov / var).max(0.0) } else { 0.0 };
    let offset = points
        .iter()
        .map(|(x, y)| y - slope * x)
        .fold(0.0f64, f64::max);
    Some((offset, slope))
}

/// The majorant over a whole trace, using `|xi|` and `|sigma|` per step.
pub fn fit_sigma_bound(trace: &ScenarioTrace) -> Option<(f64, f64)> {
    let points: Vec<(f64, f64)> = (0..trace.len())
        .map(|k| (trace.xi_norm(k), trace.sigma_norm(k)))
        .collect();
    fit_affine_majorant(&points)
}

const RAD_TO_DEG: f64 = 180.0 / std::f64::consts::PI;

fn display_error(stat: f64, unit: ChannelUnit) -> f64 {
    match unit {
        ChannelUnit::Radian => stat * RAD_TO_DEG,
        ChannelUnit::Meter => stat,
    }
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

/// Emits the comparison report over any number of runs. Rows are ordered by
/// scenario, then variant in the fixed family order (tdc, atde, artde,
/// anything else lexically), then channel. When a `baseline` variant label is
/// given and present in a scenario, improvement columns are added for every
/// other variant of that scenario.
///
/// Angle-channel error statistics are converted to degrees here; control
/// effort stays in input units.
pub fn emit_report(
    summaries: &[RunSummary],
    format: ReportFormat,
    baseline: Option<&str>,
) -> String {
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut ordered: Vec<&RunSummary> = summaries.iter().collect();
    ordered.sort_by(|a, b| {
        (a.scenario.as_str(), variant_order(&a.variant), a.variant.as_str()).cmp(&(
            b.scenario.as_str(),
            variant_order(&b.variant),
            b.variant.as_str(),
        ))
    });

    for run in &ordered {
        let base = baseline.and_then(|b| {
            ordered
                .iter()
                .find(|r| r.scenario == run.scenario && r.variant == b)
        });
        let improvements = match base {
            Some(b) if b.variant != run.variant => improvement_table(&b.stats, &run.stats).ok(),
            _ => None,
        };
        for (ch_idx, st) in run.stats.iter().enumerate() {
            let imp = improvements.as_ref().map(|t| &t[ch_idx]);
            rows.push(ReportRow {
                scenario: run.scenario.clone(),
                variant: run.variant.clone(),
                channel: st.channel.clone(),
                error_unit: st.unit.error_label().to_string(),
                rms_error: display_error(st.rms_error, st.unit),
                max_abs_error: display_error(st.max_abs_error, st.unit),
                control_unit: st.unit.control_label().to_string(),
                rms_control: st.rms_control,
                rms_improvement: imp.map(|i| i.rms_error),
                mae_improvement: imp.map(|i| i.max_abs_error),
                status: run
                    .diverged_at
                    .map(|t| format!("DIVERGED@{t:.3}"))
                    .unwrap_or_else(|| "ok".into()),
            });
        }
    }

    match format {
        ReportFormat::Csv => render_csv(&rows, baseline),
        ReportFormat::Table => render_table(&rows, summaries, baseline),
    }
}

fn variant_order(v: &str) -> u8 {
    match v {
        "tdc" => 0,
        "atde" => 1,
        "artde" => 2,
        _ => 3,
    }
}

struct ReportRow {
    scenario: String,
    variant: String,
    channel: String,
    error_unit: String,
    rms_error: f64,
    max_abs_error: f64,
    control_unit: String,
    rms_control: f64,
    /// Outer `None`: no baseline applies to this row. Inner `None`: the
    /// baseline statistic was zero, so the percentage is undefined.
    rms_improvement: Option<Option<f64>>,
    mae_improvement: Option<Option<f64>>,
    status: String,
}

fn csv_improvement(v: Option<Option<f64>>) -> String {
    match v {
        None => String::new(),
        // Zero baselines make the percentage undefined, never infinite.
        Some(None) => "undefined".into(),
        Some(Some(x)) => x.to_string(),
    }
}

fn render_csv(rows: &[ReportRow], baseline: Option<&str>) -> String {
    let mut out = String::new();
    let imp = baseline.unwrap_or("baseline");
    out.push_str(&format!(
        "scenario,variant,channel,error_unit,rms_error,max_abs_error,control_unit,rms_control,rms_improvement_vs_{imp}_pct,mae_improvement_vs_{imp}_pct,status\n"
    ));
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.variant,
            r.channel,
            r.error_unit,
            r.rms_error,
            r.max_abs_error,
            r.control_unit,
            r.rms_control,
            csv_improvement(r.rms_improvement),
            csv_improvement(r.mae_improvement),
            r.status
        ));
    }
    out
}

fn render_table(rows: &[ReportRow], summaries: &[RunSummary], baseline: Option<&str>) -> String {
    let mut out = String::new();
    let header = [
        "scenario", "variant", "ch", "rms_err", "max_err", "unit", "rms_tau", "impr_rms%",
        "impr_mae%", "status",
    ];
    let mut table: Vec<[String; 10]> = vec![header.map(String::from)];
    for r in rows {
        table.push([
            r.scenario.clone(),
            r.variant.clone(),
            r.channel.clone(),
            format!("{:.4}", r.rms_error),
            format!("{:.4}", r.max_abs_error),
            r.error_unit.clone(),
            format!("{:.3} {}", r.rms_control, r.control_unit),
            table_improvement(r.rms_improvement),
            table_improvement(r.mae_improvement),
            r.status.clone(),
        ]);
    }
    let mut widths = [0usize; 10];
    for row in &table {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    for (ridx, row) in table.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            out.push_str(&format!("{:<width$}  ", cell, width = widths[i]));
        }
        out.push('\n');
        if ridx == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len()));
            out.push('\n');
        }
    }
    if let Some(b) = baseline {
        out.push_str(&format!(
            "\nimprovement = 100*(baseline - variant)/baseline against '{b}', computed from the formula; printed comparison tables elsewhere may round differently.\n"
        ));
    }
    for s in summaries {
        if let Some((b0, b1)) = s.sigma_bound {
            out.push_str(&format!(
                "sigma-bound {} [{}]: |sigma| <= {b0:.4} + {b1:.4} |xi|\n",
                s.scenario, s.variant
            ));
        }
    }
    out
}

fn table_improvement(v: Option<Option<f64>>) -> String {
    match v {
        None => String::new(),
        Some(None) => "undefined".into(),
        Some(Some(x)) => format!("{x:.1}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Variant;
    use nalgebra::DVector;

    fn synthetic_trace(errors: &[f64], taus: &[f64], dt: f64) -> ScenarioTrace {
        let mut trace = ScenarioTrace::new(
            "synthetic",
            Variant::Artde,
            vec!["q1".into()],
            vec![ChannelUnit::Radian],
            vec!["gain0".into(), "gain1".into()],
            vec![],
        );
        for (k, (&e, &u)) in errors.iter().zip(taus).enumerate() {
            trace.t.push(k as f64 * dt);
            let v = DVector::from_row_slice(&[e]);
            let tau = DVector::from_row_slice(&[u]);
            trace.q.push(v.clone());
            trace.dq.push(v.clone());
            trace.reference.push(v.clone());
            trace.e.push(v.clone());
            trace.de.push(DVector::zeros(1));
            trace.s.push(v.clone());
            trace.n_hat.push(v.clone());
            trace.sigma.push(v.clone());
            trace.tau_tde.push(tau.clone());
            trace.tau_dd.push(DVector::zeros(1));
            trace.tau_ar.push(DVector::zeros(1));
            trace.tau_total.push(tau);
            trace.disturbance.push(DVector::zeros(1));
            trace.gains.push(vec![0.0, 0.0]);
            trace.extras.push(vec![]);
        }
        trace
    }

    #[test]
    fn constant_error_stats() {
        let trace = synthetic_trace(&[2.0; 50], &[1.0; 50], 0.1);
        let stats = channel_stats(&trace, None).unwrap();
        assert_eq!(stats[0].rms_error, 2.0);
        assert_eq!(stats[0].max_abs_error, 2.0);
        assert_eq!(stats[0].rms_control, 1.0);
    }

    #[test]
    fn sine_rms_is_amplitude_over_sqrt2() {
        let n = 1000;
        let amp = 0.7;
        let errors: Vec<f64> = (0..n)
            .map(|k| amp * (2.0 * std::f64::consts::PI * k as f64 / n as f64).sin())
            .collect();
        let trace = synthetic_trace(&errors, &vec![0.0; n], 0.01);
        let stats = channel_stats(&trace, None).unwrap();
        assert!((stats[0].rms_error - amp / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn three_phase_windowing() {
        let n = 500;
        let errors: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let trace = synthetic_trace(&errors, &vec![0.0; n], 0.1); // t in [0, 50)
        let w1 = channel_stats(&trace, Some(Window::new(0.0, 28.0))).unwrap();
        let w2 = channel_stats(&trace, Some(Window::new(28.0, 37.0))).unwrap();
        let w3 = channel_stats(&trace, Some(Window::new(37.0, f64::INFINITY))).unwrap();
        // Boundaries are honored half-open: max of phase 1 is the sample just
        // below t = 28, phase 2 starts exactly at t = 28.
        assert!((w1[0].max_abs_error - 27.9).abs() < 1e-9);
        assert!((w2[0].max_abs_error - 36.9).abs() < 1e-9);
        assert!((w3[0].max_abs_error - 49.9).abs() < 1e-9);

        let whole = channel_stats(&trace, None).unwrap();
        let full_window = channel_stats(&trace, Some(Window::all())).unwrap();
        assert_eq!(whole, full_window);
    }

    #[test]
    fn empty_window_rejected() {
        let trace = synthetic_trace(&[1.0; 10], &[0.0; 10], 0.1);
        assert!(channel_stats(&trace, Some(Window::new(5.0, 5.0))).is_err());
    }

    #[test]
    fn improvement_formula_values() {
        // 0.108 -> 0.024 gives 77.7...%
        let v = improvement_pct(0.108, 0.024).unwrap();
        assert!((v - 77.7).abs() < 0.1, "{v}");
        // 0.653 -> 0.436: the formula says 33.2%, not any other figure.
        let v = improvement_pct(0.653, 0.436).unwrap();
        assert!((v - 33.2).abs() < 0.05, "{v}");
        assert_eq!(improvement_pct(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(improvement_pct(0.0, 1.0), None);
    }

    #[test]
    fn improvement_table_identity_is_zero() {
        let trace = synthetic_trace(&[1.0; 10], &[2.0; 10], 0.1);
        let stats = channel_stats(&trace, None).unwrap();
        let table = improvement_table(&stats, &stats).unwrap();
        assert_eq!(table[0].rms_error, Some(0.0));
        assert_eq!(table[0].max_abs_error, Some(0.0));
    }

    #[test]
    fn majorant_has_zero_violations() {
        let points: Vec<(f64, f64)> = (0..200)
            .map(|k| {
                let x = k as f64 * 0.01;
                (x, 0.3 + 0.5 * x + (k as f64 * 0.7).sin().abs() * 0.2)
            })
            .collect();
        let (b0, b1) = fit_affine_majorant(&points).unwrap();
        assert!(b0.is_finite() && b1.is_finite());
        for (x, y) in &points {
            assert!(y <= &(b0 + b1 * x + 1e-12));
        }
    }

    #[test]
    fn report_degree_conversion_and_divergence_marker() {
        let mut trace = synthetic_trace(&[0.1; 10], &[1.0; 10], 0.1);
        trace.diverged_at = Some(0.9);
        let summary = RunSummary::from_trace(&trace).unwrap();
        let csv = emit_report(&[summary], ReportFormat::Csv, None);
        assert!(csv.contains("DIVERGED@0.900"), "{csv}");
        // 0.1 rad as degrees.
        assert!(csv.contains(&format!("{}", 0.1 * RAD_TO_DEG)), "{csv}");
    }

    #[test]
    fn rms_never_exceeds_max() {
        for seed in 0..20 {
            let errors: Vec<f64> = (0..100)
                .map(|k| ((k * 37 + seed * 101) % 13) as f64 * 0.3 - 1.5)
                .collect();
            let trace = synthetic_trace(&errors, &vec![0.0; 100], 0.1);
            let stats = channel_stats(&trace, None).unwrap();
            assert!(stats[0].rms_error <= stats[0].max_abs_error + 1e-15);
        }
    }

    #[test]
    fn single_variant_report_has_no_improvement_values() {
        let trace = synthetic_trace(&[0.5; 5], &[0.2; 5], 0.1);
        let summary = RunSummary::from_trace(&trace).unwrap();
        let csv = emit_report(&[summary], ReportFormat::Csv, Some("tdc"));
        let data_line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = data_line.split(',').collect();
        assert_eq!(fields[8], "");
        assert_eq!(fields[9], "");
    }
}
