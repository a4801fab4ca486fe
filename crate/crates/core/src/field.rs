//! Sampled optical fields, SLM phase patterns and target amplitudes.
//!
//! All 2D data is stored row-major as `Array2` with shape `(ny, nx)`, so
//! `data[[y, x]]` addresses row `y`, column `x`.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HoloError, Result};

/// Sampling geometry shared by the SLMs, the target plane and the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Columns.
    pub nx: usize,
    /// Rows.
    pub ny: usize,
    /// Pixel pitch in meters (square pixels).
    pub pitch: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, pitch: f64) -> Result<Self> {
        let grid = Self { nx, ny, pitch };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(HoloError::InvalidGrid(format!(
                "need at least 2x2 pixels, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(HoloError::InvalidGrid(format!(
                "pitch must be positive, got {}",
                self.pitch
            )));
        }
        Ok(())
    }

    /// `(ny, nx)`, the ndarray shape of every grid-sized buffer.
    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same pitch, dimensions multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            nx: self.nx * factor,
            ny: self.ny * factor,
            pitch: self.pitch,
        }
    }

    /// Centered frequency samples along x, covering `[-1/(2p), 1/(2p))`.
    pub fn freqs_x(&self) -> Vec<f64> {
        centered_freqs(self.nx, self.pitch)
    }

    pub fn freqs_y(&self) -> Vec<f64> {
        centered_freqs(self.ny, self.pitch)
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny || self.pitch != other.pitch {
            return Err(HoloError::GridMismatch {
                expected: self.to_string(),
                actual: other.to_string(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_shape<T>(&self, data: &Array2<T>) -> Result<()> {
        if data.dim() != self.shape() {
            let (ny, nx) = data.dim();
            return Err(HoloError::GridMismatch {
                expected: self.to_string(),
                actual: format!("{nx}x{ny} array"),
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{} @ {:e} m", self.nx, self.ny, self.pitch)
    }
}

/// Frequency of centered DFT bin `k` of an `n`-point transform; bin `n/2` is DC.
pub fn centered_freqs(n: usize, pitch: f64) -> Vec<f64> {
    let half = (n / 2) as f64;
    let span = n as f64 * pitch;
    (0..n).map(|k| (k as f64 - half) / span).collect()
}

/// Wraps a phase into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// A complex scalar field sampled on a grid at a single wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    data: Array2<Complex64>,
    wavelength: f64,
}

impl ComplexField {
    pub fn new(grid: GridSpec, data: Array2<Complex64>, wavelength: f64) -> Result<Self> {
        grid.validate()?;
        grid.check_shape(&data)?;
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(HoloError::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(HoloError::NonFinite("complex field"));
        }
        Ok(Self {
            grid,
            data,
            wavelength,
        })
    }

    /// Uniform field, e.g. a normally incident plane wave.
    pub fn constant(grid: GridSpec, value: Complex64, wavelength: f64) -> Result<Self> {
        Self::new(grid, Array2::from_elem(grid.shape(), value), wavelength)
    }

    pub(crate) fn from_parts_unchecked(
        grid: GridSpec,
        data: Array2<Complex64>,
        wavelength: f64,
    ) -> Self {
        debug_assert_eq!(data.dim(), grid.shape());
        Self {
            grid,
            data,
            wavelength,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm_sqr())
    }

    pub fn amplitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Per-pixel phase delays in radians, the SLM control variable.
///
/// Values may lie outside `[0, 2π)` while an optimizer is running; use
/// [`PhasePattern::wrapped`] for the canonical representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePattern {
    grid: GridSpec,
    phase: Array2<f64>,
}

impl PhasePattern {
    pub fn new(grid: GridSpec, phase: Array2<f64>) -> Result<Self> {
        grid.validate()?;
        grid.check_shape(&phase)?;
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(HoloError::NonFinite("phase pattern"));
        }
        Ok(Self { grid, phase })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            phase: Array2::zeros(grid.shape()),
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        Self::new(grid, Array2::from_elem(grid.shape(), value))
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, phase: Array2<f64>) -> Self {
        debug_assert_eq!(phase.dim(), grid.shape());
        Self { grid, phase }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn phase(&self) -> &Array2<f64> {
        &self.phase
    }

    pub(crate) fn phase_mut(&mut self) -> &mut Array2<f64> {
        &mut self.phase
    }

    pub fn into_phase(self) -> Array2<f64> {
        self.phase
    }

    /// Canonical copy with every value in `[0, 2π)`.
    pub fn wrapped(&self) -> Self {
        Self {
            grid: self.grid,
            phase: self.phase.mapv(wrap_phase),
        }
    }

    /// `exp(i·φ)` per pixel.
    pub fn phasor(&self) -> Array2<Complex64> {
        self.phase.mapv(|p| Complex64::from_polar(1.0, p))
    }
}

/// Normalized target amplitude in `[0, 1]` with maximum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetAmplitude {
    grid: GridSpec,
    amplitude: Array2<f64>,
}

impl TargetAmplitude {
    /// Wraps an amplitude map that is already in `[0, 1]`.
    pub fn new(grid: GridSpec, amplitude: Array2<f64>) -> Result<Self> {
        grid.validate()?;
        grid.check_shape(&amplitude)?;
        if amplitude
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0 || *a > 1.0)
        {
            return Err(HoloError::InvalidParameter(
                "target amplitude must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { grid, amplitude })
    }

    /// Square root of a non-negative linear intensity map, scaled so the
    /// brightest pixel has amplitude 1.
    pub fn from_intensity(grid: GridSpec, intensity: &Array2<f64>) -> Result<Self> {
        Self::normalized(grid, intensity.mapv(|i| i.max(0.0).sqrt()))
    }

    /// Rescales an arbitrary non-negative amplitude map to max 1.
    pub fn normalized(grid: GridSpec, amplitude: Array2<f64>) -> Result<Self> {
        grid.check_shape(&amplitude)?;
        if amplitude.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(HoloError::InvalidParameter(
                "amplitude must be finite and non-negative".into(),
            ));
        }
        let max = amplitude.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(HoloError::InvalidParameter(
                "target is zero everywhere".into(),
            ));
        }
        Self::new(grid, amplitude.mapv(|a| (a / max).min(1.0)))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitude(&self) -> &Array2<f64> {
        &self.amplitude
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.amplitude.mapv(|a| a * a)
    }
}
