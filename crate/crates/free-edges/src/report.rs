//! Run reports: per-method edge results, pairwise agreement, optional
//! Monte Carlo section. Rendered as a human-readable table or JSON.

use free_edges_core::edges::EdgeResult;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSummary {
    pub value: f64,
    pub certificate_value: f64,
    pub flatness_residual: f64,
    pub iterations: usize,
    pub boundary_escape: bool,
}

impl From<&EdgeResult> for EdgeSummary {
    fn from(r: &EdgeResult) -> Self {
        Self {
            value: r.value,
            certificate_value: r.certificate_value,
            flatness_residual: r.flatness_residual,
            iterations: r.iterations,
            boundary_escape: r.boundary_escape,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<EdgeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<EdgeSummary>,
    pub wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One unordered method pair; `|Δ|` is symmetric, so each pair is listed once.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementEntry {
    pub methods: [String; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularValues {
    pub s_max: f64,
    pub s_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSection {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub mean_max: f64,
    pub mean_min: f64,
    pub sd_max: f64,
    pub sd_min: f64,
    /// Deviation of the sample means from the deterministic edges, relative
    /// to the spectral scale.
    pub deviation_max: f64,
    pub deviation_min: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model_digest: String,
    pub methods: Vec<MethodReport>,
    pub agreement: Vec<AgreementEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular_values: Option<SingularValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

impl RunReport {
    pub fn max_disagreement(&self) -> f64 {
        self.agreement
            .iter()
            .flat_map(|e| [e.upper_delta, e.lower_delta])
            .flatten()
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, line: &str| {
            out.push_str(line);
            out.push('\n');
        };
        push(&mut out, &format!("model digest: {}", self.model_digest));
        push(&mut out, "");
        push(
            &mut out,
            &format!(
                "{:<12} {:>18} {:>18} {:>12} {:>10}",
                "method", "upper", "lower", "flatness", "wall"
            ),
        );
        for m in &self.methods {
            let fmt_edge = |e: &Option<EdgeSummary>| match e {
                Some(s) => format!("{:.10}", s.value),
                None => "-".to_string(),
            };
            let flat = m
                .upper
                .iter()
                .chain(m.lower.iter())
                .map(|s| s.flatness_residual)
                .fold(f64::NAN, |a, b| if a.is_nan() { b } else { a.max(b) });
            let flat_str = if flat.is_nan() {
                "-".to_string()
            } else {
                format!("{flat:.2e}")
            };
            push(
                &mut out,
                &format!(
                    "{:<12} {:>18} {:>18} {:>12} {:>9.1}ms",
                    m.method,
                    fmt_edge(&m.upper),
                    fmt_edge(&m.lower),
                    flat_str,
                    m.wall_ms
                ),
            );
            if let Some(note) = &m.note {
                push(&mut out, &format!("  note: {note}"));
            }
            if let Some(err) = &m.error {
                push(&mut out, &format!("  error: {err}"));
            }
        }
        if let Some(sv) = &self.singular_values {
            push(&mut out, "");
            push(
                &mut out,
                &format!(
                    "singular values: s_max = {:.10}, s_min = {:.10}",
                    sv.s_max, sv.s_min
                ),
            );
        }
        if !self.agreement.is_empty() {
            push(&mut out, "");
            push(&mut out, "pairwise agreement |Δ|:");
            for e in &self.agreement {
                let fmt = |d: Option<f64>| match d {
                    Some(v) => format!("{v:.2e}"),
                    None => "-".to_string(),
                };
                push(
                    &mut out,
                    &format!(
                        "  {:<12} vs {:<12} upper {:>10} lower {:>10}",
                        e.methods[0],
                        e.methods[1],
                        fmt(e.upper_delta),
                        fmt(e.lower_delta)
                    ),
                );
            }
        }
        if let Some(mc) = &self.mc {
            push(&mut out, "");
            push(
                &mut out,
                &format!(
                    "monte carlo (N={}, samples={}, seed={}):",
                    mc.dim, mc.samples, mc.seed
                ),
            );
            push(
                &mut out,
                &format!(
                    "  mean λ_max = {:.6} (sd {:.3e}), mean λ_min = {:.6} (sd {:.3e})",
                    mc.mean_max, mc.sd_max, mc.mean_min, mc.sd_min
                ),
            );
            let marker = if mc.flagged { "  <-- LARGE DEVIATION" } else { "" };
            push(
                &mut out,
                &format!(
                    "  deviation from edges: upper {:.2}%, lower {:.2}%{}",
                    100.0 * mc.deviation_max,
                    100.0 * mc.deviation_min,
                    marker
                ),
            );
        }
        out
    }
}
