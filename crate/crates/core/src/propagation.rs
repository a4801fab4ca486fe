//! Angular spectrum free-space propagation and its adjoint.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HoloError, Result};
use crate::fft::{ifftshift, Fft2};
use crate::field::{centered_freqs, ComplexField, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSpec {
    /// Meters.
    pub wavelength: f64,
    /// Signed propagation distance in meters; negative back-propagates.
    pub distance: f64,
    pub grid: GridSpec,
    /// Zero-padding factor, 1 (circular convolution) or 2.
    #[serde(default = "default_pad")]
    pub pad_factor: usize,
}

fn default_pad() -> usize {
    2
}

impl PropagationSpec {
    pub fn new(wavelength: f64, distance: f64, grid: GridSpec, pad_factor: usize) -> Result<Self> {
        let spec = Self {
            wavelength,
            distance,
            grid,
            pad_factor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(HoloError::InvalidParameter(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !self.distance.is_finite() {
            return Err(HoloError::InvalidParameter(
                "propagation distance must be finite".into(),
            ));
        }
        if !matches!(self.pad_factor, 1 | 2) {
            return Err(HoloError::InvalidParameter(format!(
                "pad_factor must be 1 or 2, got {}",
                self.pad_factor
            )));
        }
        Ok(())
    }

    pub fn with_distance(&self, distance: f64) -> Self {
        Self { distance, ..*self }
    }

    pub fn padded_grid(&self) -> GridSpec {
        self.grid.scaled(self.pad_factor)
    }
}

/// Transfer function `H(fx, fy)` sampled on the centered frequency grid of the
/// padded domain; evanescent components are exactly zero.
pub fn asm_transfer(spec: &PropagationSpec) -> Array2<Complex64> {
    let padded = spec.padded_grid();
    let fx = centered_freqs(padded.nx, padded.pitch);
    let fy = centered_freqs(padded.ny, padded.pitch);
    let lambda = spec.wavelength;
    let k = TAU / lambda;
    let cutoff_sq = 1.0 / (lambda * lambda);
    Array2::from_shape_fn(padded.shape(), |(y, x)| {
        let (u, v) = (fx[x], fy[y]);
        if u * u + v * v < cutoff_sq {
            let kz = (1.0 - (lambda * u).powi(2) - (lambda * v).powi(2)).sqrt();
            Complex64::from_polar(1.0, k * kz * spec.distance)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// A planned propagator for one [`PropagationSpec`].
///
/// Holds the transfer function in natural FFT order plus FFT scratch. The
/// transfer function is shared through an `Arc`, so clones for other workers
/// are cheap and only duplicate scratch.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: PropagationSpec,
    transfer: Arc<Array2<Complex64>>,
    fft: Fft2,
    work: Array2<Complex64>,
}

impl Propagator {
    pub fn new(spec: PropagationSpec) -> Result<Self> {
        spec.validate()?;
        let transfer = Arc::new(ifftshift(&asm_transfer(&spec)));
        let padded = spec.padded_grid();
        Ok(Self {
            spec,
            transfer,
            fft: Fft2::new(padded.ny, padded.nx),
            work: Array2::zeros(padded.shape()),
        })
    }

    pub fn spec(&self) -> &PropagationSpec {
        &self.spec
    }

    pub fn propagate(&mut self, field: &ComplexField) -> Result<ComplexField> {
        self.check(field)?;
        let out = self.apply(field.data(), false);
        Ok(ComplexField::from_parts_unchecked(
            self.spec.grid,
            out,
            self.spec.wavelength,
        ))
    }

    /// Conjugate transpose of [`Propagator::propagate`].
    pub fn propagate_adjoint(&mut self, cotangent: &ComplexField) -> Result<ComplexField> {
        self.check(cotangent)?;
        let out = self.apply(cotangent.data(), true);
        Ok(ComplexField::from_parts_unchecked(
            self.spec.grid,
            out,
            self.spec.wavelength,
        ))
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        self.spec.grid.check_same(field.grid())?;
        let (a, b) = (field.wavelength(), self.spec.wavelength);
        if (a - b).abs() > 1e-12 * b {
            return Err(HoloError::WavelengthMismatch { field: a, spec: b });
        }
        Ok(())
    }

    /// Unchecked array form used by solvers on their hot path.
    pub(crate) fn apply(&mut self, data: &Array2<Complex64>, adjoint: bool) -> Array2<Complex64> {
        let (ny, nx) = self.spec.grid.shape();
        let (my, mx) = self.work.dim();
        let (oy, ox) = ((my - ny) / 2, (mx - nx) / 2);
        if self.spec.pad_factor == 1 {
            self.work.assign(data);
        } else {
            self.work.fill(Complex64::new(0.0, 0.0));
            self.work
                .slice_mut(s![oy..oy + ny, ox..ox + nx])
                .assign(data);
        }
        self.fft.forward(&mut self.work);
        let scale = 1.0 / (mx * my) as f64;
        if adjoint {
            ndarray::Zip::from(&mut self.work)
                .and(&*self.transfer)
                .for_each(|w, h| *w *= h.conj() * scale);
        } else {
            ndarray::Zip::from(&mut self.work)
                .and(&*self.transfer)
                .for_each(|w, h| *w *= h * scale);
        }
        self.fft.inverse(&mut self.work);
        self.work.slice(s![oy..oy + ny, ox..ox + nx]).to_owned()
    }
}

/// One-shot propagation; plans a fresh [`Propagator`].
pub fn propagate(field: &ComplexField, spec: &PropagationSpec) -> Result<ComplexField> {
    Propagator::new(*spec)?.propagate(field)
}

/// One-shot adjoint propagation.
pub fn propagate_adjoint(cotangent: &ComplexField, spec: &PropagationSpec) -> Result<ComplexField> {
    Propagator::new(*spec)?.propagate_adjoint(cotangent)
}
