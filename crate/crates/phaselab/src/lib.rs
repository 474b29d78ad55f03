//! Experiment harness for `phaselab-core`: JSON-configured Monte Carlo
//! experiments with CSV/JSON artifacts, and the verification suite.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod verify;

use std::path::Path;

use serde_json::json;

pub use config::{ExperimentConfig, Kind, NoiseModel, Params, SetDescriptor};
pub use error::{HarnessError, Result};
pub use output::{Artifacts, Table};

/// Runs `kind` with `cfg` and writes its artifacts into `out` (or the
/// config's `output_path`).
pub fn run(kind: Kind, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Artifacts> {
    let outcome = experiments::execute(kind, cfg)?;
    let metadata = json!({
        "kind": kind.name(),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "config": cfg,
    });
    let dir = out.unwrap_or(&cfg.output_path);
    output::write_artifacts(dir, kind.name(), &outcome.table, &outcome.summary, &metadata)
}
