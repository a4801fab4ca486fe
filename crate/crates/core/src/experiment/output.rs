//! Result files: `results.csv`, `summary.json`, `trace_*.csv` and PNGs.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{HoloError, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::runner::{sweep_suffix, JobOutput, ResultRow, Trace};
use crate::imageio::{save_intensity_png, save_rgb_png};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 20] = [
    "schema_version",
    "kind",
    "method",
    "wavelength_m",
    "axis",
    "value",
    "eta1",
    "eta2",
    "psnr_db",
    "final_loss",
    "weber",
    "michelson",
    "fringe_period_px",
    "fringe_fraction",
    "shift_dx",
    "shift_dy",
    "hardware_calls",
    "status",
    "config_hash",
    "runtime_s",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HoloError + '_ {
    move |source| HoloError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HoloError + '_ {
    move |e| HoloError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Shortest round-trip representation; `inf`/`-inf`/`nan` spelled out.
fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn record(row: &ResultRow, config_hash: &str) -> Vec<String> {
    vec![
        SCHEMA_VERSION.to_string(),
        row.kind.to_string(),
        row.method.to_string(),
        num(row.wavelength_m),
        row.axis.clone(),
        opt(row.value),
        num(row.eta1),
        num(row.eta2),
        opt(row.psnr_db),
        opt(row.final_loss),
        opt(row.weber),
        opt(row.michelson),
        opt(row.fringe_period_px),
        opt(row.fringe_fraction),
        opt(row.shift_dx),
        opt(row.shift_dy),
        row.hardware_calls.to_string(),
        row.status.clone(),
        config_hash.to_string(),
        format!("{:.3}", row.runtime_s),
    ]
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow], config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(record(row, config_hash)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["iteration", "loss", "psnr_db"]).map_err(csv_err(path))?;
    for (k, (loss, psnr)) in trace.losses.iter().zip(&trace.psnr).enumerate() {
        w.write_record([k.to_string(), num(*loss), num(*psnr)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn json_num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(num(v))
    }
}

fn row_json(row: &ResultRow) -> serde_json::Value {
    let o = |v: Option<f64>| v.map(json_num).unwrap_or(serde_json::Value::Null);
    json!({
        "kind": row.kind,
        "method": row.method,
        "wavelength_m": row.wavelength_m,
        "axis": row.axis,
        "value": o(row.value),
        "eta1": json_num(row.eta1),
        "eta2": json_num(row.eta2),
        "psnr_db": o(row.psnr_db),
        "final_loss": o(row.final_loss),
        "weber": o(row.weber),
        "michelson": o(row.michelson),
        "fringe_period_px": o(row.fringe_period_px),
        "fringe_fraction": o(row.fringe_fraction),
        "shift_dx": o(row.shift_dx),
        "shift_dy": o(row.shift_dy),
        "hardware_calls": row.hardware_calls,
        "status": row.status,
        "runtime_s": row.runtime_s,
    })
}

/// Writes every artifact under `dir` and returns the files written.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outputs: &[JobOutput],
    rows: &[ResultRow],
    config_hash: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();

    let results = dir.join("results.csv");
    write_results_csv(&results, rows, config_hash)?;
    files.push(results);

    for out in outputs {
        if let Some(trace) = &out.trace {
            let path = dir.join(format!("trace_{}.csv", trace.name));
            write_trace_csv(&path, trace)?;
            files.push(path);
        }
        for (stem, img) in &out.images {
            let path = dir.join(format!("{stem}.png"));
            save_intensity_png(&path, img)?;
            files.push(path);
        }
    }
    files.extend(write_composites(dir, cfg, outputs)?);

    let summary = dir.join("summary.json");
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "config_hash": config_hash,
        "config": cfg,
        "rows": rows.iter().map(row_json).collect::<Vec<_>>(),
        "files": files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect::<Vec<_>>(),
    });
    fs::write(&summary, serde_json::to_string_pretty(&doc)?).map_err(io_err(&summary))?;
    files.push(summary);
    Ok(files)
}

/// RGB composites of the three channel captures of each method and sweep
/// point, when the run has exactly three wavelengths.
fn write_composites(dir: &Path, cfg: &ExperimentConfig, outputs: &[JobOutput]) -> Result<Vec<PathBuf>> {
    if cfg.wavelengths.len() != 3 || !cfg.save_images {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for red in outputs.iter().filter(|o| o.job.wavelength_index == 0) {
        let channel = |w: usize| {
            outputs.iter().find(|o| {
                o.job.wavelength_index == w && o.job.method == red.job.method && o.job.sweep == red.job.sweep
            })
        };
        let planes = [Some(red), channel(1), channel(2)];
        let images: Option<Vec<_>> = planes
            .iter()
            .map(|o| o.and_then(|o| o.images.first().map(|(_, img)| img)))
            .collect();
        if let Some(images) = images {
            let path = dir.join(format!("composite_{}{}.png", red.job.method, sweep_suffix(&red.job)));
            save_rgb_png(&path, [images[0], images[1], images[2]])?;
            files.push(path);
        }
    }
    Ok(files)
}
