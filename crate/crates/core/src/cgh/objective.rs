//! Dual-SLM amplitude objective and its analytic phase gradients.
//!
//! The idealized model is `û = P(exp(iφ₁)·u_src) + P(exp(iφ₂)·u_src)` with
//! `P` the angular spectrum propagator. The loss is
//! `mean((s·A - a_target)²)`, where `A` is either `|û|` (model-based) or a
//! camera measurement (camera-in-the-loop).

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HoloError, Result};
use crate::field::{ComplexField, PhasePattern, TargetAmplitude};
use crate::hardware::Capture;
use crate::propagation::{PropagationSpec, Propagator};

/// Pixels where `|field| < FLOOR·max|field|` get a zero cotangent direction.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Least-squares optimal `s = Σ(A·a)/Σ(A²)`, recomputed every evaluation.
    #[default]
    ClosedForm,
    Fixed(f64),
}

/// Which target-plane phase the camera-in-the-loop cotangent is aligned with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CitlGradient {
    /// Loss derivative taken at the measured field `g`; falls back to
    /// [`CitlGradient::Model`] when the backend only reports intensity.
    #[default]
    Physical,
    /// Loss derivative aligned with the idealized field `û`.
    Model,
}

/// Result of one objective evaluation.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub loss: f64,
    pub grad1: Array2<f64>,
    pub grad2: Option<Array2<f64>>,
    pub scale: f64,
    /// The amplitude `A` that entered the loss.
    pub amplitude: Array2<f64>,
}

/// Closed-form least-squares scale `Σ(A·a)/Σ(A²)`.
pub fn closed_form_scale(amplitude: &Array2<f64>, target: &Array2<f64>) -> Option<f64> {
    let num: f64 = Zip::from(amplitude)
        .and(target)
        .fold(0.0, |acc, &a, &t| acc + a * t);
    let den: f64 = amplitude.iter().map(|a| a * a).sum();
    (den > 0.0).then(|| num / den)
}

/// `mean((s·A - a)²)`.
pub fn scaled_mse(amplitude: &Array2<f64>, target: &Array2<f64>, scale: f64) -> f64 {
    let n = amplitude.len() as f64;
    Zip::from(amplitude)
        .and(target)
        .fold(0.0, |acc, &a, &t| acc + (scale * a - t).powi(2))
        / n
}

/// Evaluator for the idealized dual-SLM model.
///
/// Owns a planned propagator, so one instance per worker.
#[derive(Debug, Clone)]
pub struct Objective {
    target: TargetAmplitude,
    source: Array2<Complex64>,
    prop: Propagator,
    scale_mode: ScaleMode,
}

impl Objective {
    /// Unit plane-wave illumination, closed-form scale.
    pub fn new(target: TargetAmplitude, prop: PropagationSpec) -> Result<Self> {
        let source = ComplexField::constant(prop.grid, Complex64::new(1.0, 0.0), prop.wavelength)?;
        Self::with_source(target, prop, &source)
    }

    pub fn with_source(
        target: TargetAmplitude,
        prop: PropagationSpec,
        source: &ComplexField,
    ) -> Result<Self> {
        prop.grid.check_same(target.grid())?;
        prop.grid.check_same(source.grid())?;
        Ok(Self {
            target,
            source: source.data().clone(),
            prop: Propagator::new(prop)?,
            scale_mode: ScaleMode::ClosedForm,
        })
    }

    pub fn with_scale_mode(mut self, mode: ScaleMode) -> Self {
        self.scale_mode = mode;
        self
    }

    pub fn target(&self) -> &TargetAmplitude {
        &self.target
    }

    pub fn prop_spec(&self) -> &PropagationSpec {
        self.prop.spec()
    }

    fn check(&self, phi1: &PhasePattern, phi2: Option<&PhasePattern>) -> Result<()> {
        let grid = self.target.grid();
        grid.check_same(phi1.grid())?;
        if let Some(p) = phi2 {
            grid.check_same(p.grid())?;
        }
        Ok(())
    }

    fn slm_fields(
        &self,
        phi1: &PhasePattern,
        phi2: Option<&PhasePattern>,
    ) -> (Array2<Complex64>, Option<Array2<Complex64>>) {
        let field = |p: &PhasePattern| {
            Zip::from(p.phase())
                .and(&self.source)
                .map_collect(|&ph, &s| Complex64::from_polar(1.0, ph) * s)
        };
        (field(phi1), phi2.map(field))
    }

    /// Idealized target-plane field `û`.
    pub fn model_field(
        &mut self,
        phi1: &PhasePattern,
        phi2: Option<&PhasePattern>,
    ) -> Result<Array2<Complex64>> {
        self.check(phi1, phi2)?;
        let (u1, u2) = self.slm_fields(phi1, phi2);
        Ok(self.forward(u1, u2))
    }

    fn forward(&mut self, u1: Array2<Complex64>, u2: Option<Array2<Complex64>>) -> Array2<Complex64> {
        // both SLMs share one propagation distance in the idealized model
        let sum = match u2 {
            Some(u2) => u1 + u2,
            None => u1,
        };
        self.prop.apply(&sum, false)
    }

    fn scale_for(&self, amplitude: &Array2<f64>) -> Result<f64> {
        match self.scale_mode {
            ScaleMode::Fixed(s) => Ok(s),
            ScaleMode::ClosedForm => closed_form_scale(amplitude, self.target.amplitude())
                .ok_or(HoloError::DegenerateGradient),
        }
    }

    /// Loss and gradients under the idealized model.
    ///
    /// With `amplitude_override`, the residual uses that amplitude instead of
    /// `|û|` while the backward pass still follows `û`.
    pub fn loss_and_gradient(
        &mut self,
        phi1: &PhasePattern,
        phi2: Option<&PhasePattern>,
        amplitude_override: Option<&Array2<f64>>,
    ) -> Result<LossGradient> {
        self.check(phi1, phi2)?;
        if let Some(a) = amplitude_override {
            self.target.grid().check_shape(a)?;
        }
        let (u1, u2) = self.slm_fields(phi1, phi2);
        let model = self.forward(u1.clone(), u2.clone());
        let direction = unit_phasors(&model)?;
        let amplitude = match amplitude_override {
            Some(a) => a.clone(),
            None => model.mapv(|c| c.norm()),
        };
        self.backward(&u1, u2.as_ref(), amplitude, &direction)
    }

    /// Camera-in-the-loop evaluation from one hardware measurement.
    pub fn loss_and_gradient_measured(
        &mut self,
        phi1: &PhasePattern,
        phi2: Option<&PhasePattern>,
        capture: &Capture,
        mode: CitlGradient,
    ) -> Result<LossGradient> {
        self.check(phi1, phi2)?;
        self.target.grid().check_shape(&capture.amplitude)?;
        match (mode, &capture.field) {
            (CitlGradient::Physical, Some(field)) => {
                self.target.grid().check_shape(field)?;
                let (u1, u2) = self.slm_fields(phi1, phi2);
                let direction = unit_phasors(field)?;
                self.backward(&u1, u2.as_ref(), capture.amplitude.clone(), &direction)
            }
            _ => self.loss_and_gradient(phi1, phi2, Some(&capture.amplitude)),
        }
    }

    /// Chain rule from the residual back to both phase maps.
    ///
    /// `∂L/∂A = 2s(sA - a)/n`, cotangent `w = ∂L/∂A · d` with `d` a unit phasor
    /// field, and `∂L/∂φ_k = Re[conj(i·exp(iφ_k)·u_src) · Pᴴw]`.
    fn backward(
        &mut self,
        u1: &Array2<Complex64>,
        u2: Option<&Array2<Complex64>>,
        amplitude: Array2<f64>,
        direction: &Array2<Complex64>,
    ) -> Result<LossGradient> {
        let target = self.target.amplitude();
        let scale = self.scale_for(&amplitude)?;
        let n = amplitude.len() as f64;
        let loss = scaled_mse(&amplitude, target, scale);
        let cotangent = Zip::from(&amplitude)
            .and(target)
            .and(direction)
            .map_collect(|&a, &t, &d| d * (2.0 * scale * (scale * a - t) / n));
        let back = self.prop.apply(&cotangent, true);
        // Re[conj(i·z)·b] = Im[conj(z)·b]
        let grad = |u: &Array2<Complex64>| {
            Zip::from(u)
                .and(&back)
                .map_collect(|&u, &b| (u.conj() * b).im)
        };
        Ok(LossGradient {
            loss,
            grad1: grad(u1),
            grad2: u2.map(grad),
            scale,
            amplitude,
        })
    }
}

/// `field/|field|` with the magnitude floor applied.
fn unit_phasors(field: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let max = field.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return Err(HoloError::DegenerateGradient);
    }
    let floor = MAGNITUDE_FLOOR * max;
    Ok(field.mapv(|c| {
        let m = c.norm();
        if m < floor {
            Complex64::new(0.0, 0.0)
        } else {
            c / m
        }
    }))
}

/// One-shot evaluation with unit plane-wave illumination and closed-form scale.
///
/// Returns `(loss, grad1, grad2, s)`.
pub fn loss_and_gradient(
    phi1: &PhasePattern,
    phi2: Option<&PhasePattern>,
    target: &TargetAmplitude,
    prop: &PropagationSpec,
    amplitude_override: Option<&Array2<f64>>,
) -> Result<(f64, Array2<f64>, Option<Array2<f64>>, f64)> {
    let mut obj = Objective::new(target.clone(), *prop)?;
    let r = obj.loss_and_gradient(phi1, phi2, amplitude_override)?;
    Ok((r.loss, r.grad1, r.grad2, r.scale))
}
