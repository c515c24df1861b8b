//! Batch experiment driver.
//!
//! A run reads one flat-text config, executes the named experiment kind
//! with the core crate, and writes `report.json`, `data/*.csv` and
//! `plots/*.svg` into the output directory. Validation problems abort
//! with exit code 2 before anything is written; numerical failures
//! leave a diagnostic `report.json` behind and exit with code 3.
//! Reports are byte-identical across runs and across thread counts.

pub mod config;
pub mod report;
pub mod runners;
pub mod svg;

use closure_core::pal;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Config or input problem: exit 2, no artifacts.
    #[error("{0}")]
    Validation(String),
    /// The computation itself failed: exit 3, diagnostic report.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

/// Name of the environment variable that overrides `run.threads`.
pub const THREADS_ENV: &str = "CLOSURE_LAB_THREADS";

fn effective_threads(from_config: usize) -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => raw.trim().parse::<usize>().ok().filter(|&t| t >= 1).ok_or_else(|| {
            CliError::Validation(format!(
                "{THREADS_ENV} must be a positive integer, got `{raw}`"
            ))
        }),
        Err(_) => Ok(from_config),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

/// Execute the config at `path`. On success returns the location of the
/// written `report.json`; on a numerical failure the diagnostic report
/// is written before the error is returned.
pub fn run(path: &Path) -> Result<PathBuf, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let entries = config::parse(&text)?;
    let cfg = config::resolve(&entries)?;
    let threads = effective_threads(cfg.threads)?;

    let report_path = cfg.out.join("report.json");
    match pal::run_with_threads(threads, || runners::run_kind(&cfg)) {
        Ok(artifacts) => {
            fs::create_dir_all(&cfg.out).map_err(|e| {
                CliError::Validation(format!("cannot create {}: {e}", cfg.out.display()))
            })?;
            write_file(
                &report_path,
                &report::success(cfg.kind.name, cfg.seed, artifacts.result),
            )?;
            if !artifacts.csv.is_empty() {
                let data = cfg.out.join("data");
                fs::create_dir_all(&data).map_err(|e| {
                    CliError::Validation(format!("cannot create {}: {e}", data.display()))
                })?;
                for (name, contents) in &artifacts.csv {
                    write_file(&data.join(name), contents)?;
                }
            }
            if !artifacts.svg.is_empty() {
                let plots = cfg.out.join("plots");
                fs::create_dir_all(&plots).map_err(|e| {
                    CliError::Validation(format!("cannot create {}: {e}", plots.display()))
                })?;
                for (name, contents) in &artifacts.svg {
                    write_file(&plots.join(name), contents)?;
                }
            }
            Ok(report_path)
        }
        Err(CliError::Numerical(msg)) => {
            // Best-effort diagnostic record; the exit code carries the
            // failure either way.
            if fs::create_dir_all(&cfg.out).is_ok() {
                let _ = fs::write(
                    &report_path,
                    report::failure(cfg.kind.name, cfg.seed, &msg),
                );
            }
            Err(CliError::Numerical(msg))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_config_is_a_validation_error() {
        let err = run(Path::new("/nonexistent/conf.txt")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn renorm_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let conf = dir.path().join("renorm.cfg");
        fs::write(
            &conf,
            format!(
                "run.kind = renorm\nrun.out = {}\nrenorm.epsilon = 1e-6\n",
                out.display()
            ),
        )
        .unwrap();
        let report_path = run(&conf).unwrap();
        let report = fs::read_to_string(report_path).unwrap();
        assert!(report.contains("\"status\":\"ok\""));
        assert!(report.contains("\"k\":17"));
        assert!(out.join("data/conjugates.csv").is_file());
        assert!(out.join("plots/norms.svg").is_file());
    }

    #[test]
    fn validation_failure_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let conf = dir.path().join("bad.cfg");
        fs::write(
            &conf,
            format!(
                "run.kind = flow-compare\nrun.out = {}\nflow-compare.grid_per_axis = -3\n",
                out.display()
            ),
        )
        .unwrap();
        let err = run(&conf).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!out.exists());
    }

    #[test]
    fn numerical_failure_leaves_a_diagnostic_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let conf = dir.path().join("stuck.cfg");
        // Tiny k_max cannot reach the threshold crossing: numerical failure.
        fs::write(
            &conf,
            format!(
                "run.kind = renorm\nrun.out = {}\nrenorm.epsilon = 1e-6\nrenorm.k_max = 3\n",
                out.display()
            ),
        )
        .unwrap();
        let err = run(&conf).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let report = fs::read_to_string(out.join("report.json")).unwrap();
        assert!(report.contains("\"status\":\"error\""));
        assert!(report.contains("\"kind\":\"renorm\""));
    }
}
