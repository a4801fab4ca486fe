//! Job expansion and execution for every experiment kind.

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{apply_alignment, calibrate_pair, dot_grid_pattern, AlignmentEstimate};
use crate::cgh::{
    citl_solve_with, dpac_dual, dpac_single, sgd_solve_observed, IterationView, RunRecord,
    SolverConfig,
};
use crate::error::{HoloError, Result};
use crate::experiment::config::{ExperimentConfig, ExperimentKind, Method, SweepAxis, TargetSpec};
use crate::field::{ComplexField, PhasePattern, TargetAmplitude};
use crate::hardware::{CaptureBackend, EmulatedCamera, EmulatedHardware, HardwareProfile};
use crate::imageio::{load_target_with, LoadOptions};
use crate::metrics::{
    contrast_from_sinusoid, scaled_psnr, spectral_fraction, spectral_peak, Axis2,
};
use crate::targets::{dot_grid, resolution_chart, sinusoid_grating};

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub method: Method,
    pub wavelength_index: usize,
    pub sweep: Option<(SweepAxis, f64)>,
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub kind: &'static str,
    pub method: Method,
    pub wavelength_m: f64,
    /// Sweep axis name, `iteration` for fringe checkpoints, empty otherwise.
    pub axis: String,
    pub value: Option<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub psnr_db: Option<f64>,
    pub final_loss: Option<f64>,
    pub weber: Option<f64>,
    pub michelson: Option<f64>,
    pub fringe_period_px: Option<f64>,
    pub fringe_fraction: Option<f64>,
    pub shift_dx: Option<f64>,
    pub shift_dy: Option<f64>,
    pub hardware_calls: u64,
    pub status: String,
    pub runtime_s: f64,
}

/// Loss/PSNR history of one iterative run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub name: String,
    pub losses: Vec<f64>,
    pub psnr: Vec<f64>,
}

/// Everything a job produces.
#[derive(Debug, Clone)]
pub struct JobOutput {
    pub job: Job,
    pub rows: Vec<ResultRow>,
    pub trace: Option<Trace>,
    /// `(file stem, intensity)` pairs.
    pub images: Vec<(String, Array2<f64>)>,
}

/// Phases chosen by a method and the camera frame they produce.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub phi1: PhasePattern,
    pub phi2: Option<PhasePattern>,
    /// Final camera intensity.
    pub capture: Array2<f64>,
    pub record: Option<RunRecord>,
    pub hardware_calls: u64,
}

/// Computes the patterns for `method`, displays them on `hw` and captures
/// the result. Single-SLM methods leave SLM 2's path blocked.
///
/// Model-based methods see only `hw.prop`; `alignment`, when given, is
/// applied to their SLM 2 pattern before display. Camera-in-the-loop methods
/// see the full hardware through the capture interface.
pub fn run_method(
    method: Method,
    target: &TargetAmplitude,
    hw: &HardwareProfile,
    solver: &SolverConfig,
    alignment: Option<&AlignmentEstimate>,
    observer: &mut dyn FnMut(&IterationView),
) -> Result<MethodOutcome> {
    let prop = hw.prop;
    let dual = method.is_dual();
    let mut camera = EmulatedCamera::new(EmulatedHardware::new(hw.clone())?);
    let (phi1, phi2, record) = match method {
        Method::Dpac1 => {
            let phase = solver.target_phase.pattern(&prop);
            (dpac_single(target, &phase, &prop)?, None, None)
        }
        Method::Dpac2 => {
            let phase = solver.target_phase.pattern(&prop);
            let (a, b) = dpac_dual(target, &phase, &prop)?;
            (a, Some(b), None)
        }
        Method::Sgd1 | Method::Sgd2 => {
            let rec = sgd_solve_observed(target, &prop, solver, dual, observer)?;
            (rec.phi1.clone(), rec.phi2.clone(), Some(rec))
        }
        Method::Citl1 | Method::Citl2 => {
            let rec = citl_solve_with(target, &mut camera, &prop, solver, dual, observer)?;
            (rec.phi1.clone(), rec.phi2.clone(), Some(rec))
        }
    };
    let phi2 = match (phi2, alignment) {
        (Some(p), Some(est)) if !matches!(method, Method::Citl1 | Method::Citl2) => Some(apply_alignment(&p, est)),
        (p, _) => p,
    };
    let frame = camera.capture(&phi1, phi2.as_ref())?;
    Ok(MethodOutcome {
        capture: frame.amplitude.mapv(|a| a * a),
        hardware_calls: camera.calls(),
        phi1,
        phi2,
        record,
    })
}

/// Loads or synthesizes the target for wavelength index `w`.
pub fn build_target(cfg: &ExperimentConfig, w: usize) -> Result<TargetAmplitude> {
    match &cfg.target {
        TargetSpec::ResolutionChart => resolution_chart(cfg.grid),
        TargetSpec::Image { path, srgb } => load_target_with(
            path,
            cfg.grid,
            LoadOptions {
                channel: cfg.channel_for(w),
                srgb: *srgb,
            },
        ),
        TargetSpec::Sinusoid { period, axis } => sinusoid_grating(cfg.grid, *period, *axis),
        TargetSpec::DotGrid { spacing, radius } => dot_grid(cfg.grid, *spacing, *radius),
    }
}

/// Hardware for wavelength `w` with the job's sweep value applied.
pub fn build_hardware(
    cfg: &ExperimentConfig,
    w: usize,
    sweep: Option<(SweepAxis, f64)>,
) -> Result<HardwareProfile> {
    let prop = cfg.prop(cfg.wavelengths[w])?;
    let source = ComplexField::constant(prop.grid, Complex64::new(1.0, 0.0), prop.wavelength)?;
    let mut hw = HardwareProfile {
        slm1: cfg.hardware.slm1,
        slm2: cfg.hardware.slm2,
        camera: cfg.hardware.camera,
        source,
        prop,
        rng_seed: cfg.hardware.rng_seed,
    };
    if let Some(eta) = cfg.eta_override(w) {
        hw.slm1.eta = eta;
        hw.slm2.eta = eta;
    }
    match sweep {
        Some((SweepAxis::OneMinusEta, v)) => {
            hw.slm1.eta = 1.0 - v;
            hw.slm2.eta = 1.0 - v;
        }
        Some((SweepAxis::Lateral, v)) => hw.slm2.lateral_shift = [v, 0.0],
        Some((SweepAxis::Axial, v)) => hw.slm2.axial_shift = v,
        None => {}
    }
    hw.validate()?;
    Ok(hw)
}

/// All jobs of `cfg` in output order.
pub fn expand_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut points: Vec<Option<(SweepAxis, f64)>> = cfg
        .sweeps
        .iter()
        .flat_map(|s| s.values.iter().map(move |&v| Some((s.axis, v))))
        .collect();
    points.sort_by(|a, b| match (a, b) {
        (Some((xa, va)), Some((xb, vb))) => xa.cmp(xb).then(va.total_cmp(vb)),
        _ => std::cmp::Ordering::Equal,
    });
    points.dedup();
    if points.is_empty() {
        points.push(None);
    }
    let mut jobs = Vec::new();
    for &method in &methods {
        for w in 0..cfg.wavelengths.len() {
            for &sweep in &points {
                jobs.push(Job {
                    method,
                    wavelength_index: w,
                    sweep,
                });
            }
        }
    }
    jobs
}

/// Per-wavelength inputs shared by every job.
struct Shared {
    targets: Vec<TargetAmplitude>,
    calibration_patterns: Vec<Option<PhasePattern>>,
}

/// Runs every job of `cfg` on `cfg.workers` threads. Results come back in
/// job order, independent of scheduling.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<JobOutput>> {
    cfg.validate()?;
    let targets = (0..cfg.wavelengths.len())
        .map(|w| build_target(cfg, w))
        .collect::<Result<Vec<_>>>()?;
    let calibration_patterns = (0..cfg.wavelengths.len())
        .map(|w| {
            if cfg.calibrate {
                let spacing = (cfg.grid.nx.min(cfg.grid.ny) / 8).max(4);
                dot_grid_pattern(&cfg.prop(cfg.wavelengths[w])?, spacing, spacing as f64 / 6.0)
                    .map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let shared = Shared {
        targets,
        calibration_patterns,
    };
    let jobs = expand_jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HoloError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|job| run_job(cfg, &shared, *job)).collect()))
}

fn run_job(cfg: &ExperimentConfig, shared: &Shared, job: Job) -> JobOutput {
    let start = Instant::now();
    let result = match cfg.kind {
        ExperimentKind::FringeConvergence => fringe_job(cfg, shared, job),
        _ => scored_job(cfg, shared, job),
    };
    let runtime = start.elapsed().as_secs_f64();
    match result {
        Ok(mut out) => {
            for row in &mut out.rows {
                row.runtime_s = runtime;
            }
            out
        }
        Err(e) => {
            let mut row = base_row(cfg, job);
            row.status = format!("error: {e}");
            row.runtime_s = runtime;
            JobOutput {
                job,
                rows: vec![row],
                trace: None,
                images: Vec::new(),
            }
        }
    }
}

fn base_row(cfg: &ExperimentConfig, job: Job) -> ResultRow {
    let hw = build_hardware(cfg, job.wavelength_index, job.sweep).ok();
    ResultRow {
        kind: cfg.kind.as_str(),
        method: job.method,
        wavelength_m: cfg.wavelengths[job.wavelength_index],
        axis: job.sweep.map(|(a, _)| a.as_str().to_string()).unwrap_or_default(),
        value: job.sweep.map(|(_, v)| v),
        eta1: hw.as_ref().map_or(f64::NAN, |h| h.slm1.eta),
        eta2: hw.as_ref().map_or(f64::NAN, |h| h.slm2.eta),
        psnr_db: None,
        final_loss: None,
        weber: None,
        michelson: None,
        fringe_period_px: None,
        fringe_fraction: None,
        shift_dx: None,
        shift_dy: None,
        hardware_calls: 0,
        status: "ok".into(),
        runtime_s: 0.0,
    }
}

/// File stem shared by a job's outputs, e.g. `citl2_520nm_lateral_0p25`.
pub fn job_stem(cfg: &ExperimentConfig, job: &Job) -> String {
    let nm = cfg.wavelengths[job.wavelength_index] * 1e9;
    format!("{}_{}nm{}", job.method, format_value(nm), sweep_suffix(job))
}

/// `_<axis>_<value>` for sweep jobs, empty otherwise.
pub fn sweep_suffix(job: &Job) -> String {
    job.sweep
        .map(|(axis, v)| format!("_{}_{}", axis.as_str(), format_value(v)))
        .unwrap_or_default()
}

fn format_value(v: f64) -> String {
    let s = format!("{}", (v * 1e9).round() / 1e9);
    s.replace('-', "m").replace('.', "p")
}

fn scored_job(cfg: &ExperimentConfig, shared: &Shared, job: Job) -> Result<JobOutput> {
    let w = job.wavelength_index;
    let target = &shared.targets[w];
    let hw = build_hardware(cfg, w, job.sweep)?;
    let mut row = base_row(cfg, job);

    let alignment = match &shared.calibration_patterns[w] {
        Some(pattern) if job.method.is_dual() => {
            let mut emu = EmulatedHardware::new(hw.clone())?;
            let est = calibrate_pair(&mut emu, pattern)?;
            row.shift_dx = Some(est.dx);
            row.shift_dy = Some(est.dy);
            Some(est)
        }
        _ => None,
    };

    let outcome = run_method(job.method, target, &hw, &cfg.solver, alignment.as_ref(), &mut |_| {})?;
    let amplitude = outcome.capture.mapv(f64::sqrt);
    row.psnr_db = Some(scaled_psnr(&amplitude, target, cfg.psnr_mode)?);
    row.final_loss = outcome.record.as_ref().map(|r| r.final_loss);
    row.hardware_calls = outcome.hardware_calls;
    if let TargetSpec::Sinusoid { period, axis } = cfg.target {
        let c = contrast_from_sinusoid(&outcome.capture, period, axis)?;
        row.weber = Some(c.weber);
        row.michelson = Some(c.michelson);
    }

    let stem = job_stem(cfg, &job);
    let trace = outcome.record.as_ref().map(|r| Trace {
        name: stem.clone(),
        losses: r.losses.clone(),
        psnr: r.psnr.clone(),
    });
    let images = if cfg.save_images {
        vec![(format!("capture_{stem}"), display_intensity(&outcome.capture, target))]
    } else {
        Vec::new()
    };
    Ok(JobOutput {
        job,
        rows: vec![row],
        trace,
        images,
    })
}

/// Captured intensity scaled by the closed-form `s²` so it sits on the
/// target's `[0, 1]` range.
pub fn display_intensity(capture: &Array2<f64>, target: &TargetAmplitude) -> Array2<f64> {
    let amplitude = capture.mapv(f64::sqrt);
    let s = crate::cgh::objective::closed_form_scale(&amplitude, target.amplitude()).unwrap_or(1.0);
    capture.mapv(|v| s * s * v)
}

fn fringe_job(cfg: &ExperimentConfig, shared: &Shared, job: Job) -> Result<JobOutput> {
    let w = job.wavelength_index;
    let target = &shared.targets[w];
    let hw = build_hardware(cfg, w, job.sweep)?;
    let mut checkpoints = cfg.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let mut saved: Vec<(usize, PhasePattern, Option<PhasePattern>)> = Vec::new();
    let outcome = run_method(job.method, target, &hw, &cfg.solver, None, &mut |view| {
        if checkpoints.binary_search(&view.iteration).is_ok() {
            saved.push((view.iteration, view.phi1.clone(), view.phi2.cloned()));
        }
    })?;

    let axis = if hw.slm2.tilt[1].abs() > hw.slm2.tilt[0].abs() {
        Axis2::Y
    } else {
        Axis2::X
    };
    let mut emu = EmulatedHardware::new(hw.clone())?;
    let captures = saved
        .iter()
        .map(|(k, p1, p2)| Ok((*k, emu.capture(Some(p1), p2.as_ref(), *k as u64)?)))
        .collect::<Result<Vec<_>>>()?;
    // fringe frequency as seen in the first checkpoint
    let reference = match captures.first() {
        Some((_, img)) => Some(spectral_peak(img, axis)?),
        None => None,
    };

    let stem = job_stem(cfg, &job);
    let mut rows = Vec::new();
    let mut images = Vec::new();
    for (k, img) in &captures {
        let mut row = base_row(cfg, job);
        row.axis = "iteration".into();
        row.value = Some(*k as f64);
        row.psnr_db = Some(scaled_psnr(&img.mapv(f64::sqrt), target, cfg.psnr_mode)?);
        if let Some(peak) = reference {
            row.fringe_period_px = Some(peak.period_px);
            row.fringe_fraction = Some(spectral_fraction(img, axis, peak.bin)?);
        }
        row.hardware_calls = outcome.hardware_calls;
        if let Some(r) = &outcome.record {
            row.final_loss = r.losses.get(*k).copied().or(Some(r.final_loss));
        }
        if cfg.save_images {
            let scaled = img / img.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
            images.push((format!("fringe_{stem}_iter{k}"), scaled));
        }
        rows.push(row);
    }
    let trace = outcome.record.as_ref().map(|r| Trace {
        name: stem,
        losses: r.losses.clone(),
        psnr: r.psnr.clone(),
    });
    Ok(JobOutput {
        job,
        rows,
        trace,
        images,
    })
}

/// Sorts rows by method, wavelength, axis and value.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.wavelength_m.total_cmp(&b.wavelength_m))
            .then(a.axis.cmp(&b.axis))
            .then(a.value.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.value.unwrap_or(f64::NEG_INFINITY)))
    });
}
