//! Gradient-descent phase solvers: model-based SGD and camera-in-the-loop SGD.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cgh::dpac::{dpac_dual, dpac_single, TargetPhase};
use crate::cgh::objective::{CitlGradient, LossGradient, Objective, ScaleMode};
use crate::error::{HoloError, Result};
use crate::field::{GridSpec, PhasePattern, TargetAmplitude};
use crate::hardware::{Capture, CaptureBackend, EmulatedCamera, EmulatedHardware, HardwareProfile};
use crate::metrics::psnr_from_mse;
use crate::propagation::PropagationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    UniformRandomPhase,
    Zero,
    DpacSeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub iterations: usize,
    /// Raw step `α` on the gradient of the per-pixel mean loss. Gradients
    /// shrink with pixel count, so useful values grow with it (about the pixel
    /// count works for the default momentum).
    pub step_size: f64,
    /// Heavy-ball coefficient `β` in `[0, 1)`.
    pub momentum: f64,
    pub init_mode: InitMode,
    pub loss: LossKind,
    pub scale_mode: ScaleMode,
    pub rng_seed: u64,
    pub citl_gradient: CitlGradient,
    /// Target-plane phase for DPAC and DPAC-seeded initialization.
    pub target_phase: TargetPhase,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            step_size: 65536.0,
            momentum: 0.9,
            init_mode: InitMode::UniformRandomPhase,
            loss: LossKind::Mse,
            scale_mode: ScaleMode::ClosedForm,
            rng_seed: 0,
            citl_gradient: CitlGradient::Physical,
            target_phase: TargetPhase::Quadratic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(HoloError::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(HoloError::InvalidParameter(format!(
                "step_size must be > 0, got {}",
                self.step_size
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(HoloError::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if let ScaleMode::Fixed(s) = self.scale_mode {
            if !s.is_finite() {
                return Err(HoloError::InvalidParameter("fixed scale must be finite".into()));
            }
        }
        Ok(())
    }

    /// Short stable digest of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("solver config always serializes");
        short_digest(&json)
    }
}

pub(crate) fn short_digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Digest of everything that defines an emulated display.
pub fn hardware_hash(hw: &HardwareProfile) -> String {
    let desc = serde_json::json!({
        "slm1": hw.slm1,
        "slm2": hw.slm2,
        "camera": hw.camera,
        "prop": hw.prop,
        "rng_seed": hw.rng_seed,
    });
    let mut bytes = serde_json::to_vec(&desc).expect("hardware description serializes");
    for c in hw.source.data().iter() {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    short_digest(&bytes)
}

/// Output of one solver run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub solver: String,
    /// Loss at the start of every iteration; `len == iterations`.
    pub losses: Vec<f64>,
    /// Intensity PSNR of the amplitude that entered each loss evaluation.
    pub psnr: Vec<f64>,
    pub phi1: PhasePattern,
    pub phi2: Option<PhasePattern>,
    /// Final amplitude (model or captured) scaled by the final `s`.
    pub reconstruction: Array2<f64>,
    pub final_loss: f64,
    pub final_scale: f64,
    pub config_hash: String,
    pub hardware_hash: Option<String>,
    pub hardware_calls: u64,
}

/// Solver state exposed to observers at iterate `k` (after `k` updates).
pub struct IterationView<'a> {
    pub iteration: usize,
    pub phi1: &'a PhasePattern,
    pub phi2: Option<&'a PhasePattern>,
    pub eval: &'a LossGradient,
    /// The hardware measurement behind `eval`, for camera-in-the-loop runs.
    pub capture: Option<&'a Capture>,
}

fn psnr_of(eval: &LossGradient, target: &TargetAmplitude) -> f64 {
    let n = eval.amplitude.len() as f64;
    let s = eval.scale;
    let mse = ndarray::Zip::from(&eval.amplitude)
        .and(target.amplitude())
        .fold(0.0, |acc, &a, &t| acc + ((s * a).powi(2) - t * t).powi(2))
        / n;
    psnr_from_mse(mse)
}

/// Initial phase pair for `config.init_mode`.
pub fn initial_phases(
    target: &TargetAmplitude,
    prop: &PropagationSpec,
    config: &SolverConfig,
    dual: bool,
) -> Result<(PhasePattern, Option<PhasePattern>)> {
    let grid = *target.grid();
    Ok(match config.init_mode {
        InitMode::Zero => (PhasePattern::zeros(grid), dual.then(|| PhasePattern::zeros(grid))),
        InitMode::UniformRandomPhase => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let p1 = random_phase(grid, &mut rng);
            let p2 = dual.then(|| random_phase(grid, &mut rng));
            (p1, p2)
        }
        InitMode::DpacSeed => {
            let phase = config.target_phase.pattern(prop);
            if dual {
                let (a, b) = dpac_dual(target, &phase, prop)?;
                (a, Some(b))
            } else {
                (dpac_single(target, &phase, prop)?, None)
            }
        }
    })
}

fn random_phase(grid: GridSpec, rng: &mut ChaCha8Rng) -> PhasePattern {
    let data = Array2::from_shape_simple_fn(grid.shape(), || rng.random_range(0.0..TAU));
    PhasePattern::from_parts_unchecked(grid, data)
}

/// Heavy-ball gradient descent driving `evaluate` from the configured start.
///
/// `evaluate` returns the objective at the current phases; it is where the
/// model-based and camera-in-the-loop variants differ.
fn descend<F>(
    solver: String,
    target: &TargetAmplitude,
    prop: &PropagationSpec,
    config: &SolverConfig,
    dual: bool,
    mut evaluate: F,
    observer: &mut dyn FnMut(&IterationView),
) -> Result<(RunRecord, LossGradient)>
where
    F: FnMut(&PhasePattern, Option<&PhasePattern>) -> Result<(LossGradient, Option<Capture>)>,
{
    config.validate()?;
    prop.grid.check_same(target.grid())?;
    let (mut phi1, mut phi2) = initial_phases(target, prop, config, dual)?;
    let shape = target.grid().shape();
    let mut vel1 = Array2::<f64>::zeros(shape);
    let mut vel2 = dual.then(|| Array2::<f64>::zeros(shape));
    let mut losses = Vec::with_capacity(config.iterations);
    let mut psnr = Vec::with_capacity(config.iterations);
    let (alpha, beta) = (config.step_size, config.momentum);

    for k in 0..config.iterations {
        let (eval, capture) = evaluate(&phi1, phi2.as_ref())?;
        if !eval.loss.is_finite() {
            return Err(HoloError::Diverged { iteration: k });
        }
        observer(&IterationView {
            iteration: k,
            phi1: &phi1,
            phi2: phi2.as_ref(),
            eval: &eval,
            capture: capture.as_ref(),
        });
        losses.push(eval.loss);
        psnr.push(psnr_of(&eval, target));
        step(&mut phi1, &mut vel1, &eval.grad1, alpha, beta);
        if let (Some(p), Some(v), Some(g)) = (phi2.as_mut(), vel2.as_mut(), eval.grad2.as_ref()) {
            step(p, v, g, alpha, beta);
        }
    }

    let (last, capture) = evaluate(&phi1, phi2.as_ref())?;
    if !last.loss.is_finite() {
        return Err(HoloError::Diverged {
            iteration: config.iterations,
        });
    }
    observer(&IterationView {
        iteration: config.iterations,
        phi1: &phi1,
        phi2: phi2.as_ref(),
        eval: &last,
        capture: capture.as_ref(),
    });
    let s = last.scale;
    let record = RunRecord {
        solver,
        losses,
        psnr,
        phi1: phi1.wrapped(),
        phi2: phi2.map(|p| p.wrapped()),
        reconstruction: last.amplitude.mapv(|a| s * a),
        final_loss: last.loss,
        final_scale: s,
        config_hash: config.hash(),
        hardware_hash: None,
        hardware_calls: 0,
    };
    Ok((record, last))
}

fn step(phi: &mut PhasePattern, vel: &mut Array2<f64>, grad: &Array2<f64>, alpha: f64, beta: f64) {
    ndarray::Zip::from(phi.phase_mut())
        .and(vel)
        .and(grad)
        .for_each(|p, v, &g| {
            *v = beta * *v + g;
            *p -= alpha * *v;
        });
}

fn solver_name(kind: &str, dual: bool) -> String {
    format!("{kind}{}", if dual { 2 } else { 1 })
}

/// Model-based SGD on the idealized model.
pub fn sgd_solve(
    target: &TargetAmplitude,
    prop: &PropagationSpec,
    config: &SolverConfig,
    dual: bool,
) -> Result<RunRecord> {
    sgd_solve_observed(target, prop, config, dual, &mut |_| {})
}

pub fn sgd_solve_observed(
    target: &TargetAmplitude,
    prop: &PropagationSpec,
    config: &SolverConfig,
    dual: bool,
    observer: &mut dyn FnMut(&IterationView),
) -> Result<RunRecord> {
    let mut objective = Objective::new(target.clone(), *prop)?.with_scale_mode(config.scale_mode);
    let (record, _) = descend(
        solver_name("sgd", dual),
        target,
        prop,
        config,
        dual,
        |p1, p2| Ok((objective.loss_and_gradient(p1, p2, None)?, None)),
        observer,
    )?;
    Ok(record)
}

/// Camera-in-the-loop SGD against the emulated display `hw`.
pub fn citl_solve(
    target: &TargetAmplitude,
    hw: &HardwareProfile,
    prop: &PropagationSpec,
    config: &SolverConfig,
    dual: bool,
) -> Result<RunRecord> {
    let mut camera = EmulatedCamera::new(EmulatedHardware::new(hw.clone())?);
    let mut record = citl_solve_with(target, &mut camera, prop, config, dual, &mut |_| {})?;
    record.hardware_hash = Some(hardware_hash(hw));
    Ok(record)
}

/// Camera-in-the-loop SGD through any [`CaptureBackend`].
///
/// Each iteration displays the current phases, measures once, evaluates the
/// loss on the measured amplitude and back-propagates through the idealized
/// model (plane-wave illumination).
pub fn citl_solve_with(
    target: &TargetAmplitude,
    backend: &mut dyn CaptureBackend,
    prop: &PropagationSpec,
    config: &SolverConfig,
    dual: bool,
    observer: &mut dyn FnMut(&IterationView),
) -> Result<RunRecord> {
    prop.grid.check_same(backend.grid())?;
    let mut objective = Objective::new(target.clone(), *prop)?.with_scale_mode(config.scale_mode);
    let start_calls = backend.calls();
    let mode = config.citl_gradient;
    let (mut record, _) = descend(
        solver_name("citl", dual),
        target,
        prop,
        config,
        dual,
        |p1, p2| {
            let capture = backend.capture(p1, p2)?;
            let eval = objective.loss_and_gradient_measured(p1, p2, &capture, mode)?;
            Ok((eval, Some(capture)))
        },
        observer,
    )?;
    record.hardware_calls = backend.calls() - start_calls;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (TargetAmplitude, PropagationSpec) {
        let g = GridSpec::new(n, n, 6.4e-6).unwrap();
        let prop = PropagationSpec::new(520e-9, 0.02, g, 1).unwrap();
        let t = TargetAmplitude::normalized(
            g,
            Array2::from_shape_fn((n, n), |(y, x)| if (x / 4 + y / 4) % 2 == 0 { 1.0 } else { 0.1 }),
        )
        .unwrap();
        (t, prop)
    }

    #[test]
    fn zero_iterations_rejected() {
        let (t, prop) = setup(8);
        let cfg = SolverConfig {
            iterations: 0,
            ..SolverConfig::default()
        };
        assert!(sgd_solve(&t, &prop, &cfg, true).is_err());
    }

    #[test]
    fn single_iteration_is_one_gradient_step() {
        let (t, prop) = setup(16);
        let cfg = SolverConfig {
            iterations: 1,
            step_size: 100.0,
            ..SolverConfig::default()
        };
        let rec = sgd_solve(&t, &prop, &cfg, true).unwrap();
        assert_eq!(rec.losses.len(), 1);

        let (p1, p2) = initial_phases(&t, &prop, &cfg, true).unwrap();
        let mut obj = Objective::new(t.clone(), prop).unwrap();
        let eval = obj.loss_and_gradient(&p1, p2.as_ref(), None).unwrap();
        assert_eq!(rec.losses[0], eval.loss);
        let want1 = (p1.phase() - &(eval.grad1.mapv(|g| g * 100.0))).mapv(crate::field::wrap_phase);
        for (a, b) in rec.phi1.phase().iter().zip(want1.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let (t, prop) = setup(16);
        let cfg = SolverConfig {
            iterations: 20,
            step_size: 300.0,
            rng_seed: 7,
            ..SolverConfig::default()
        };
        let a = sgd_solve(&t, &prop, &cfg, true).unwrap();
        let b = sgd_solve(&t, &prop, &cfg, true).unwrap();
        assert_eq!(a.losses, b.losses);
        let c = sgd_solve(&t, &prop, &SolverConfig { rng_seed: 8, ..cfg }, true).unwrap();
        assert_ne!(a.losses, c.losses);
    }

    #[test]
    fn single_slm_run_has_no_second_pattern() {
        let (t, prop) = setup(8);
        let cfg = SolverConfig {
            iterations: 3,
            step_size: 50.0,
            ..SolverConfig::default()
        };
        let rec = sgd_solve(&t, &prop, &cfg, false).unwrap();
        assert!(rec.phi2.is_none());
        assert_eq!(rec.solver, "sgd1");
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = SolverConfig {
            scale_mode: ScaleMode::Fixed(2.0),
            init_mode: InitMode::DpacSeed,
            ..SolverConfig::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SolverConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert!(serde_json::from_str::<SolverConfig>(r#"{"iterations":5,"unknown":1}"#).is_err());
    }
}
