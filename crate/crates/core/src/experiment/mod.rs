//! Configuration-driven experiments: efficiency and misalignment sweeps,
//! fringe convergence and grating contrast, with deterministic output.

pub mod config;
pub mod output;
pub mod runner;

use std::path::PathBuf;

pub use config::{
    ExperimentConfig, ExperimentKind, HardwareConfig, Method, Sweep, SweepAxis, TargetSpec,
};
pub use output::{CSV_HEADER, SCHEMA_VERSION};
pub use runner::{
    build_hardware, build_target, execute, expand_jobs, run_method, Job, JobOutput,
    MethodOutcome, ResultRow, Trace,
};

use crate::cgh::solver::short_digest;
use crate::error::Result;

/// What a finished experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Sorted as written to `results.csv`.
    pub rows: Vec<ResultRow>,
    pub outputs: Vec<JobOutput>,
    pub files: Vec<PathBuf>,
    pub config_hash: String,
}

impl ExperimentReport {
    pub fn failed_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.status != "ok")
    }
}

/// Digest of everything that affects results; the worker count and output
/// location are left out.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.workers = 0;
    canonical.output_dir = PathBuf::new();
    short_digest(&serde_json::to_vec(&canonical).expect("experiment config serializes"))
}

/// Validates `cfg`, runs every job and writes all outputs under
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let outputs = execute(cfg)?;
    let mut rows: Vec<ResultRow> = outputs.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    runner::sort_rows(&mut rows);
    let hash = config_hash(cfg);
    let files = output::write_outputs(&cfg.output_dir, cfg, &outputs, &rows, &hash)?;
    Ok(ExperimentReport {
        rows,
        outputs,
        files,
        config_hash: hash,
    })
}
