//! Experiment runner for the `nctorus` library: JSON configs in, CSV artifacts out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig, Kind};
pub use error::{CliError, Result};
pub use experiments::{Check, Relation, Report};

/// Parses, validates and runs the config at `path`, writing its artifacts
/// under `out` (or relative to the working directory).
pub fn run_file(path: &Path, out: Option<&Path>) -> Result<(Report, Vec<PathBuf>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let exp = cfg.experiment()?;
    let report = experiments::run(&exp, cfg.seed, Path::new(&cfg.output_path))?;
    let written = output::write_all(&report.artifacts, out)?;
    Ok((report, written))
}

/// Runs the acceptance suite and writes its artifacts plus `verify_summary.csv` under `out`.
pub fn verify_to(filter: Option<&str>, out: &Path) -> Result<Vec<verify::CriterionResult>> {
    let results = verify::verify_all(filter)?;
    let mut artifacts: Vec<output::Artifact> = results.iter().flat_map(|r| r.artifacts.clone()).collect();
    artifacts.push(output::Artifact::csv("verify_summary.csv", &verify::summary_table(&results)));
    output::write_all(&artifacts, Some(out))?;
    Ok(results)
}
