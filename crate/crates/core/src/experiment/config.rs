//! JSON experiment configuration and the built-in presets.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cgh::SolverConfig;
use crate::error::{HoloError, Result};
use crate::field::GridSpec;
use crate::hardware::{CameraProfile, SlmProfile};
use crate::imageio::Channel;
use crate::metrics::{Axis2, PsnrMode};
use crate::propagation::PropagationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleRun,
    EfficiencySweep,
    MisalignmentSweep,
    FringeConvergence,
    ContrastEval,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SingleRun => "single_run",
            Self::EfficiencySweep => "efficiency_sweep",
            Self::MisalignmentSweep => "misalignment_sweep",
            Self::FringeConvergence => "fringe_convergence",
            Self::ContrastEval => "contrast_eval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dpac1,
    Dpac2,
    Sgd1,
    Sgd2,
    Citl1,
    Citl2,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dpac1,
        Method::Dpac2,
        Method::Sgd1,
        Method::Sgd2,
        Method::Citl1,
        Method::Citl2,
    ];

    pub fn is_dual(&self) -> bool {
        matches!(self, Method::Dpac2 | Method::Sgd2 | Method::Citl2)
    }

    pub fn is_iterative(&self) -> bool {
        !matches!(self, Method::Dpac1 | Method::Dpac2)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dpac1 => "dpac1",
            Method::Dpac2 => "dpac2",
            Method::Sgd1 => "sgd1",
            Method::Sgd2 => "sgd2",
            Method::Citl1 => "citl1",
            Method::Citl2 => "citl2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the target image comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    ResolutionChart,
    /// PNG/PGM file; relative paths resolve against the config file.
    Image {
        path: PathBuf,
        #[serde(default)]
        srgb: bool,
    },
    Sinusoid {
        /// Period in pixels.
        period: f64,
        #[serde(default = "default_axis")]
        axis: Axis2,
    },
    DotGrid {
        spacing: usize,
        radius: f64,
    },
}

fn default_axis() -> Axis2 {
    Axis2::X
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Undiffracted fraction `1 - η`, applied to both SLMs.
    OneMinusEta,
    /// SLM 2 lateral offset along x, pixels.
    Lateral,
    /// SLM 2 extra propagation distance, meters.
    Axial,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OneMinusEta => "one_minus_eta",
            Self::Lateral => "lateral",
            Self::Axial => "axial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Hidden hardware parameters; the geometry comes from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub slm1: SlmProfile,
    pub slm2: SlmProfile,
    pub camera: CameraProfile,
    pub rng_seed: u64,
    /// Per-wavelength `η` for both SLMs, overriding `slm1.eta`/`slm2.eta`.
    pub eta_per_wavelength: Option<Vec<f64>>,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            slm1: SlmProfile::default(),
            slm2: SlmProfile::default(),
            camera: CameraProfile::default(),
            rng_seed: 0,
            eta_per_wavelength: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub target: TargetSpec,
    pub grid: GridSpec,
    /// Meters; each wavelength is an independent job.
    pub wavelengths: Vec<f64>,
    /// SLM to target distance, meters.
    pub z: f64,
    pub pad_factor: usize,
    pub methods: Vec<Method>,
    pub sweeps: Vec<Sweep>,
    pub hardware: HardwareConfig,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    /// Worker threads; `0` uses every core.
    pub workers: usize,
    /// Fringe-convergence iterations whose captures are saved.
    pub checkpoints: Vec<usize>,
    /// Estimate the inter-SLM shift from dot-grid captures and pre-compensate
    /// the model-based dual-SLM patterns with it.
    pub calibrate: bool,
    pub psnr_mode: PsnrMode,
    pub save_images: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::SingleRun,
            target: TargetSpec::ResolutionChart,
            grid: GridSpec {
                nx: 256,
                ny: 256,
                pitch: 6.4e-6,
            },
            wavelengths: vec![520e-9],
            z: 0.1,
            pad_factor: 1,
            methods: vec![Method::Dpac2, Method::Sgd2, Method::Citl2],
            sweeps: Vec::new(),
            hardware: HardwareConfig::default(),
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("out"),
            workers: 1,
            checkpoints: vec![0, 30, 100, 500],
            calibrate: false,
            psnr_mode: PsnrMode::Intensity,
            save_images: true,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file; relative image paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HoloError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let TargetSpec::Image { path, .. } = &mut self.target {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig2" => Ok(preset_fig2()),
            "fig5" => Ok(preset_fig5()),
            "fig3" => Ok(preset_fig3()),
            "table1" => Ok(preset_table1()),
            other => Err(HoloError::Config(format!(
                "unknown preset `{other}` (expected fig2, fig5, fig3 or table1)"
            ))),
        }
    }

    /// Propagation geometry for one wavelength.
    pub fn prop(&self, wavelength: f64) -> Result<PropagationSpec> {
        PropagationSpec::new(wavelength, self.z, self.grid, self.pad_factor)
    }

    /// `η` of both SLMs for wavelength index `w`, when overridden.
    pub fn eta_override(&self, w: usize) -> Option<f64> {
        self.hardware
            .eta_per_wavelength
            .as_ref()
            .map(|etas| etas[w])
    }

    pub fn channel_for(&self, w: usize) -> Channel {
        if self.wavelengths.len() == 3 {
            Channel::rgb(w)
        } else {
            Channel::Gray
        }
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(HoloError::Config(msg));
        self.grid.validate()?;
        if self.methods.is_empty() {
            return err("methods must not be empty".into());
        }
        if self.wavelengths.is_empty() {
            return err("wavelengths must not be empty".into());
        }
        for &wl in &self.wavelengths {
            self.prop(wl)?;
        }
        if !(self.z.is_finite()) {
            return err(format!("z must be finite, got {}", self.z));
        }
        self.solver.validate()?;
        self.hardware.slm1.validate(&self.grid)?;
        self.hardware.slm2.validate(&self.grid)?;
        self.hardware.camera.validate()?;
        if let Some(etas) = &self.hardware.eta_per_wavelength {
            if etas.len() != self.wavelengths.len() {
                return err(format!(
                    "eta_per_wavelength has {} entries for {} wavelengths",
                    etas.len(),
                    self.wavelengths.len()
                ));
            }
            if etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
                return err("eta_per_wavelength entries must lie in [0, 1]".into());
            }
        }
        self.validate_target()?;
        self.validate_sweeps()?;
        if self.kind == ExperimentKind::FringeConvergence {
            if self.checkpoints.is_empty() {
                return err("checkpoints must not be empty".into());
            }
            if let Some(&k) = self.checkpoints.iter().find(|&&k| k > self.solver.iterations) {
                return err(format!(
                    "checkpoint {k} exceeds the {} solver iterations",
                    self.solver.iterations
                ));
            }
            if let Some(m) = self.methods.iter().find(|m| !m.is_iterative()) {
                return err(format!("fringe_convergence needs iterative methods, got {m}"));
            }
        }
        Ok(())
    }

    fn validate_target(&self) -> Result<()> {
        match &self.target {
            TargetSpec::Sinusoid { period, axis } => {
                let len = match axis {
                    Axis2::X => self.grid.nx,
                    Axis2::Y => self.grid.ny,
                } as f64;
                if !(period.is_finite() && *period >= 2.0 && 3.0 * period <= len) {
                    return Err(HoloError::Config(format!(
                        "sinusoid period {period} px must be >= 2 and fit 3 times in {len} px"
                    )));
                }
            }
            TargetSpec::DotGrid { spacing, radius } => {
                if *spacing < 2 || !(radius.is_finite() && *radius > 0.0) {
                    return Err(HoloError::Config("dot_grid needs spacing >= 2 and radius > 0".into()));
                }
            }
            TargetSpec::Image { .. } | TargetSpec::ResolutionChart => {}
        }
        if self.kind == ExperimentKind::ContrastEval && !matches!(self.target, TargetSpec::Sinusoid { .. }) {
            return Err(HoloError::Config("contrast_eval needs a sinusoid target".into()));
        }
        Ok(())
    }

    fn validate_sweeps(&self) -> Result<()> {
        let err = |msg: String| Err(HoloError::Config(msg));
        let allowed: &[SweepAxis] = match self.kind {
            ExperimentKind::EfficiencySweep => &[SweepAxis::OneMinusEta],
            ExperimentKind::MisalignmentSweep => &[SweepAxis::Lateral, SweepAxis::Axial],
            _ => {
                if !self.sweeps.is_empty() {
                    return err(format!("{} takes no sweeps", self.kind.as_str()));
                }
                return Ok(());
            }
        };
        if self.sweeps.is_empty() {
            return err(format!("{} needs at least one sweep", self.kind.as_str()));
        }
        for sweep in &self.sweeps {
            if !allowed.contains(&sweep.axis) {
                return err(format!(
                    "sweep axis {} is not valid for {}",
                    sweep.axis.as_str(),
                    self.kind.as_str()
                ));
            }
            if sweep.values.is_empty() {
                return err(format!("sweep {} has no values", sweep.axis.as_str()));
            }
            for &v in &sweep.values {
                let ok = match sweep.axis {
                    SweepAxis::OneMinusEta => (0.0..1.0).contains(&v),
                    SweepAxis::Lateral => v.is_finite() && v.abs() <= self.grid.nx as f64 / 4.0,
                    SweepAxis::Axial => v.is_finite(),
                };
                if !ok {
                    return err(format!("sweep {} value {v} out of range", sweep.axis.as_str()));
                }
            }
        }
        Ok(())
    }
}

/// Continuous-phase SLMs, so `η` and misalignment are the only departures
/// from the idealized model.
fn desk_hardware(eta: f64) -> HardwareConfig {
    HardwareConfig {
        slm1: SlmProfile::ideal().with_eta(eta),
        slm2: SlmProfile::ideal().with_eta(eta),
        ..HardwareConfig::default()
    }
}

/// Resolution chart over `1 - η ∈ {0, 0.1, …, 0.5}`, all methods.
pub fn preset_fig2() -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::EfficiencySweep,
        methods: Method::ALL.to_vec(),
        sweeps: vec![Sweep {
            axis: SweepAxis::OneMinusEta,
            values: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }],
        hardware: desk_hardware(1.0),
        output_dir: PathBuf::from("out/fig2"),
        ..ExperimentConfig::default()
    }
}

/// Lateral and axial SLM 2 offsets at `η = 0.8`; axial offsets are whole
/// multiples of the pixel pitch.
pub fn preset_fig5() -> ExperimentConfig {
    let pitch = 6.4e-6;
    ExperimentConfig {
        kind: ExperimentKind::MisalignmentSweep,
        methods: vec![Method::Dpac2, Method::Sgd2, Method::Citl2],
        sweeps: vec![
            Sweep {
                axis: SweepAxis::Lateral,
                values: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            },
            Sweep {
                axis: SweepAxis::Axial,
                values: [0.0, 1.0, 2.0, 4.0].iter().map(|k| k * pitch).collect(),
            },
        ],
        hardware: desk_hardware(0.8),
        output_dir: PathBuf::from("out/fig5"),
        ..ExperimentConfig::default()
    }
}

/// CITL from zero phases with a tilted second SLM, so the first capture is a
/// fringe pattern.
pub fn preset_fig3() -> ExperimentConfig {
    let mut hardware = desk_hardware(0.8);
    hardware.slm2.tilt = [0.2, 0.0];
    ExperimentConfig {
        kind: ExperimentKind::FringeConvergence,
        methods: vec![Method::Citl2],
        hardware,
        solver: SolverConfig {
            init_mode: crate::cgh::InitMode::Zero,
            step_size: 4096.0,
            ..SolverConfig::default()
        },
        output_dir: PathBuf::from("out/fig3"),
        ..ExperimentConfig::default()
    }
}

/// Grating contrast for red, green and blue with the lowest `η` in blue.
pub fn preset_table1() -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::ContrastEval,
        target: TargetSpec::Sinusoid {
            period: 16.0,
            axis: Axis2::X,
        },
        wavelengths: vec![638e-9, 520e-9, 450e-9],
        methods: vec![Method::Sgd1, Method::Citl1, Method::Citl2],
        hardware: HardwareConfig {
            eta_per_wavelength: Some(vec![0.85, 0.8, 0.6]),
            ..desk_hardware(0.8)
        },
        output_dir: PathBuf::from("out/table1"),
        ..ExperimentConfig::default()
    }
}
