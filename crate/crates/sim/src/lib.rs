//! Scenario harness for the BB84-AES simulator: configuration, seeded
//! execution, resource sweeps, canned attack batches, and report emission.

pub mod batches;
pub mod config;
pub mod metrics;
pub mod scenario;
pub mod sweep;

pub use config::ScenarioConfig;
pub use metrics::MetricsReport;
pub use scenario::{build_ledger, run_scenario};
pub use sweep::{sweep_xi, SweepRow};

use std::io::Write;
use std::path::Path;

/// Write a finished report to a file or stdout.
pub fn emit_report(content: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => std::io::stdout().write_all(content.as_bytes()),
    }
}
