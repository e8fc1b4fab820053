//! Metrics report with deterministic, golden-file-friendly serialization.
//!
//! Every numeric field carries its unit, field order is fixed, and floats
//! print at six significant digits, so the same report always serializes to
//! the same bytes.

use bb84aes::protocol::DetectionEvent;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    UInt(u128),
    Float(f64),
    Text(String),
    Flag(bool),
}

/// Six significant digits; plain notation near unity, scientific outside.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if mag >= 7 || mag <= -5 {
        format!("{v:.5e}")
    } else {
        let decimals = (5 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    }
}

impl MetricValue {
    fn render(&self) -> String {
        match self {
            MetricValue::UInt(v) => v.to_string(),
            MetricValue::Float(v) => fmt_sig(*v),
            MetricValue::Text(s) => s.clone(),
            MetricValue::Flag(b) => b.to_string(),
        }
    }

    fn render_json(&self) -> String {
        match self {
            MetricValue::Text(s) => format!("\"{s}\""),
            other => other.render(),
        }
    }
}

/// One round's worth of reportable numbers.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub status: String,
    pub variant: String,
    pub seed: u64,
    pub n_pulses: u64,
    pub clicks: u64,
    pub efficiency: f64,
    pub qber_estimate: Option<f64>,
    pub qber_omniscient: f64,
    pub detection_event_count: u64,
    pub detection_latency_groups: Option<u64>,
    pub detection_latency_ticks: Option<u64>,
    pub eve_strategy: Option<String>,
    pub eve_agreement: Option<f64>,
    pub eve_guessed_bits: Option<u64>,
    pub eve_stored_photons: Option<u64>,
    pub eve_blocked_pulses: Option<u64>,
    pub tags_consumed_alice: Option<u128>,
    pub tags_consumed_bob: Option<u128>,
    pub budget_limit: Option<u128>,
    pub rounds_per_secret: Option<f64>,
    pub classical_bits_per_qubit: Option<f64>,
    pub classical_rate_bits_per_s: Option<f64>,
    pub table_bytes: Option<u64>,
    pub max_comparisons: Option<u64>,
    pub raw_key_bits: u64,
    pub disclosed_bits: u64,
    pub leakage_bits: u64,
    pub security_margin_bits: u64,
    pub final_key_bits: u64,
    pub consumer_key_bits: Option<u64>,
    pub ticks_elapsed: u64,
    pub threshold_compliant: bool,
    pub detection_events: Vec<DetectionEvent>,
}

impl MetricsReport {
    /// Secret-exhaustion projection rounded to two significant figures, the
    /// precision at which it is quoted.
    pub fn rounds_per_secret_2sig(&self) -> Option<String> {
        self.rounds_per_secret.map(|v| format!("{v:.1e}"))
    }

    /// Fixed field order shared by the CSV and JSON forms:
    /// (name, unit, value).
    fn fields(&self) -> Vec<(&'static str, &'static str, Option<MetricValue>)> {
        use MetricValue as V;
        vec![
            ("status", "enum", Some(V::Text(self.status.clone()))),
            ("variant", "label", Some(V::Text(self.variant.clone()))),
            ("seed", "seed", Some(V::UInt(self.seed as u128))),
            ("n_pulses", "pulses", Some(V::UInt(self.n_pulses as u128))),
            ("clicks", "detections", Some(V::UInt(self.clicks as u128))),
            ("efficiency", "fraction", Some(V::Float(self.efficiency))),
            (
                "qber_estimate",
                "fraction",
                self.qber_estimate.map(V::Float),
            ),
            (
                "qber_omniscient",
                "fraction",
                Some(V::Float(self.qber_omniscient)),
            ),
            (
                "detection_event_count",
                "events",
                Some(V::UInt(self.detection_event_count as u128)),
            ),
            (
                "detection_latency_groups",
                "groups",
                self.detection_latency_groups.map(|v| V::UInt(v as u128)),
            ),
            (
                "detection_latency_ticks",
                "ticks",
                self.detection_latency_ticks.map(|v| V::UInt(v as u128)),
            ),
            (
                "eve_strategy",
                "label",
                self.eve_strategy.clone().map(V::Text),
            ),
            (
                "eve_agreement",
                "fraction",
                self.eve_agreement.map(V::Float),
            ),
            (
                "eve_guessed_bits",
                "bits",
                self.eve_guessed_bits.map(|v| V::UInt(v as u128)),
            ),
            (
                "eve_stored_photons",
                "photons",
                self.eve_stored_photons.map(|v| V::UInt(v as u128)),
            ),
            (
                "eve_blocked_pulses",
                "pulses",
                self.eve_blocked_pulses.map(|v| V::UInt(v as u128)),
            ),
            (
                "tags_consumed_alice",
                "tags",
                self.tags_consumed_alice.map(V::UInt),
            ),
            (
                "tags_consumed_bob",
                "tags",
                self.tags_consumed_bob.map(V::UInt),
            ),
            ("budget_limit", "tags", self.budget_limit.map(V::UInt)),
            (
                "rounds_per_secret",
                "rounds",
                self.rounds_per_secret.map(V::Float),
            ),
            (
                "rounds_per_secret_2sig",
                "rounds",
                self.rounds_per_secret_2sig().map(V::Text),
            ),
            (
                "classical_bits_per_qubit",
                "bits",
                self.classical_bits_per_qubit.map(V::Float),
            ),
            (
                "classical_rate",
                "bits_per_second",
                self.classical_rate_bits_per_s.map(V::Float),
            ),
            (
                "table_bytes",
                "bytes",
                self.table_bytes.map(|v| V::UInt(v as u128)),
            ),
            (
                "max_comparisons",
                "comparisons",
                self.max_comparisons.map(|v| V::UInt(v as u128)),
            ),
            (
                "raw_key_bits",
                "bits",
                Some(V::UInt(self.raw_key_bits as u128)),
            ),
            (
                "disclosed_bits",
                "bits",
                Some(V::UInt(self.disclosed_bits as u128)),
            ),
            (
                "leakage_bits",
                "bits",
                Some(V::UInt(self.leakage_bits as u128)),
            ),
            (
                "security_margin_bits",
                "bits",
                Some(V::UInt(self.security_margin_bits as u128)),
            ),
            (
                "final_key_bits",
                "bits",
                Some(V::UInt(self.final_key_bits as u128)),
            ),
            (
                "consumer_key_bits",
                "bits",
                self.consumer_key_bits.map(|v| V::UInt(v as u128)),
            ),
            (
                "ticks_elapsed",
                "ticks",
                Some(V::UInt(self.ticks_elapsed as u128)),
            ),
            (
                "threshold_compliant",
                "flag",
                Some(V::Flag(self.threshold_compliant)),
            ),
        ]
    }

    pub fn csv_header() -> String {
        let report = MetricsReport::default();
        let mut cols: Vec<String> = report
            .fields()
            .iter()
            .map(|(name, unit, _)| format!("{name}_{unit}"))
            .collect();
        cols.push("detection_events_list".into());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut cells: Vec<String> = self
            .fields()
            .iter()
            .map(|(_, _, value)| value.as_ref().map(|v| v.render()).unwrap_or_default())
            .collect();
        let events: Vec<String> = self
            .detection_events
            .iter()
            .map(|e| format!("{}@g{}t{}", e.kind.label(), e.group, e.tick))
            .collect();
        cells.push(events.join(";"));
        format!("{}\n{}\n", Self::csv_header(), cells.join(","))
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let fields = self.fields();
        for (name, unit, value) in &fields {
            let rendered = match value {
                Some(v) => format!("{{\"value\": {}, \"unit\": \"{unit}\"}}", v.render_json()),
                None => "null".into(),
            };
            out.push_str(&format!("  \"{name}\": {rendered},\n"));
        }
        out.push_str("  \"detection_events\": [");
        let events: Vec<String> = self
            .detection_events
            .iter()
            .map(|e| {
                format!(
                    "{{\"kind\": \"{}\", \"group\": {}, \"tick\": {}}}",
                    e.kind.label(),
                    e.group,
                    e.tick
                )
            })
            .collect();
        out.push_str(&events.join(", "));
        out.push_str("]\n}\n");
        out
    }
}
