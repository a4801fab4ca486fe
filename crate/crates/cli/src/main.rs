use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holosim::experiment::{run_experiment, ExperimentConfig};
use holosim::HoloError;
use serde_json::Value;

/// Runs dual-SLM holography experiments from a JSON config or a built-in preset.
#[derive(Parser, Debug)]
#[command(name = "holosim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write results under the output directory.
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Experiment config (JSON). With `--preset`, its keys override the preset.
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for both the solver and the emulated hardware.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["fig2", "fig5", "fig3", "table1"])]
    preset: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    match run(&args) {
        Ok(failed) if failed == 0 => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} job(s) did not finish; see the status column of results.csv");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &RunArgs) -> Result<usize, HoloError> {
    let cfg = resolve_config(args)?;
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    println!(
        "{} rows, config {} -> {}",
        report.rows.len(),
        report.config_hash,
        cfg.output_dir.display()
    );
    for row in report.failed_rows() {
        eprintln!("{} {}: {}", row.method, row.axis, row.status);
    }
    Ok(report.failed_rows().count())
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, HoloError> {
    let mut cfg = match (&args.preset, &args.config) {
        (None, None) => {
            return Err(HoloError::Config("give a config file, a --preset, or both".into()))
        }
        (None, Some(path)) => ExperimentConfig::from_file(path)?,
        (Some(name), None) => ExperimentConfig::preset(name)?,
        (Some(name), Some(path)) => {
            let mut base = serde_json::to_value(ExperimentConfig::preset(name)?)?;
            merge(&mut base, read_json(path)?);
            let mut cfg: ExperimentConfig = serde_json::from_value(base)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
    };
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(seed) = args.seed {
        cfg.solver.rng_seed = seed;
        cfg.hardware.rng_seed = seed;
    }
    Ok(cfg)
}

fn read_json(path: &Path) -> Result<Value, HoloError> {
    let text = std::fs::read_to_string(path).map_err(|source| HoloError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// JSON merge patch: objects merge key by key, anything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
