//! Emulated dual-SLM display: imperfect SLM response, beam combination and a
//! virtual camera.
//!
//! This is the "physical" system the camera-in-the-loop solver measures. It is
//! deliberately richer than the idealized model used for gradients: each SLM
//! has a diffraction efficiency, phase quantization, an optional lookup-table
//! nonlinearity, and lateral/axial/tilt misalignment.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HoloError, Result};
use crate::fft::Fft2;
use crate::field::{wrap_phase, ComplexField, GridSpec, PhasePattern};
use crate::propagation::{PropagationSpec, Propagator};

/// SLM drive resolution: a number of phase levels, or `"continuous"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseLevels {
    Discrete(u32),
    Continuous(ContinuousTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContinuousTag {
    Continuous,
}

impl PhaseLevels {
    pub const CONTINUOUS: Self = PhaseLevels::Continuous(ContinuousTag::Continuous);
}

impl Default for PhaseLevels {
    fn default() -> Self {
        PhaseLevels::Discrete(256)
    }
}

/// Camera quantization: bits per pixel, or `"ideal"` for none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BitDepth {
    Bits(u32),
    Ideal(IdealTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdealTag {
    Ideal,
}

impl BitDepth {
    pub const IDEAL: Self = BitDepth::Ideal(IdealTag::Ideal);
}

impl Default for BitDepth {
    fn default() -> Self {
        Self::IDEAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlmProfile {
    /// Diffraction efficiency in `[0, 1]`.
    pub eta: f64,
    pub phase_levels: PhaseLevels,
    /// `(dx, dy)` in pixels, sub-pixel allowed.
    pub lateral_shift: [f64; 2],
    /// Extra propagation distance in meters.
    pub axial_shift: f64,
    /// Linear phase ramp `(tx, ty)` in radians per pixel.
    pub tilt: [f64; 2],
    /// Lookup-table distortion strength `k` of the monotone cubic
    /// `t + k·t(1-t)(1-2t)` on `t = φ/2π`; zero is identity, `[-1, 2]` keeps it monotone.
    pub lut_nonlinearity: f64,
}

impl Default for SlmProfile {
    fn default() -> Self {
        Self {
            eta: 1.0,
            phase_levels: PhaseLevels::default(),
            lateral_shift: [0.0, 0.0],
            axial_shift: 0.0,
            tilt: [0.0, 0.0],
            lut_nonlinearity: 0.0,
        }
    }
}

impl SlmProfile {
    /// Perfect, continuously addressable, aligned SLM.
    pub fn ideal() -> Self {
        Self {
            phase_levels: PhaseLevels::CONTINUOUS,
            ..Self::default()
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(HoloError::InvalidParameter(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if let PhaseLevels::Discrete(n) = self.phase_levels {
            if n < 2 {
                return Err(HoloError::InvalidParameter(format!(
                    "phase_levels must be >= 2, got {n}"
                )));
            }
        }
        let [dx, dy] = self.lateral_shift;
        if !(dx.is_finite() && dy.is_finite())
            || dx.abs() > grid.nx as f64 / 4.0
            || dy.abs() > grid.ny as f64 / 4.0
        {
            return Err(HoloError::InvalidParameter(format!(
                "lateral_shift {:?} exceeds a quarter of the grid",
                self.lateral_shift
            )));
        }
        if !self.axial_shift.is_finite() || self.tilt.iter().any(|t| !t.is_finite()) {
            return Err(HoloError::InvalidParameter(
                "misalignment parameters must be finite".into(),
            ));
        }
        if !(-1.0..=2.0).contains(&self.lut_nonlinearity) {
            return Err(HoloError::InvalidParameter(format!(
                "lut_nonlinearity must lie in [-1, 2], got {}",
                self.lut_nonlinearity
            )));
        }
        Ok(())
    }

    fn has_lateral_shift(&self) -> bool {
        self.lateral_shift != [0.0, 0.0]
    }

    /// Displayed phase for a commanded value: LUT distortion then quantization.
    fn displayed_phase(&self, phi: f64) -> f64 {
        let mut p = wrap_phase(phi);
        if self.lut_nonlinearity != 0.0 {
            let t = p / TAU;
            p = TAU * (t + self.lut_nonlinearity * t * (1.0 - t) * (1.0 - 2.0 * t));
        }
        match self.phase_levels {
            PhaseLevels::Continuous(_) => p,
            PhaseLevels::Discrete(n) => {
                let step = TAU / n as f64;
                ((p / step).round() as u64 % n as u64) as f64 * step
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraProfile {
    /// Gaussian intensity noise std as a fraction of the frame's peak.
    pub noise_sigma: f64,
    /// With finite bits, intensities are clipped to `[0, 1]` before quantization.
    pub bit_depth: BitDepth,
    pub exposure_scale: f64,
}

impl Default for CameraProfile {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            bit_depth: BitDepth::IDEAL,
            exposure_scale: 1.0,
        }
    }
}

impl CameraProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(HoloError::InvalidParameter(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.exposure_scale.is_finite() && self.exposure_scale > 0.0) {
            return Err(HoloError::InvalidParameter(format!(
                "exposure_scale must be > 0, got {}",
                self.exposure_scale
            )));
        }
        if let BitDepth::Bits(b) = self.bit_depth {
            if !(1..=32).contains(&b) {
                return Err(HoloError::InvalidParameter(format!(
                    "bit_depth must be in 1..=32, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// The hidden physical parameters of the emulated display.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub slm1: SlmProfile,
    pub slm2: SlmProfile,
    pub camera: CameraProfile,
    /// Illumination `u_src` incident on both SLMs.
    pub source: ComplexField,
    pub prop: PropagationSpec,
    pub rng_seed: u64,
}

impl HardwareProfile {
    /// Two ideal SLMs lit by a unit plane wave, noise-free camera.
    pub fn ideal(prop: PropagationSpec) -> Result<Self> {
        let source =
            ComplexField::constant(prop.grid, Complex64::new(1.0, 0.0), prop.wavelength)?;
        Ok(Self {
            slm1: SlmProfile::ideal(),
            slm2: SlmProfile::ideal(),
            camera: CameraProfile::default(),
            source,
            prop,
            rng_seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.prop.validate()?;
        self.prop.grid.check_same(self.source.grid())?;
        if (self.source.wavelength() - self.prop.wavelength).abs() > 1e-12 * self.prop.wavelength
        {
            return Err(HoloError::WavelengthMismatch {
                field: self.source.wavelength(),
                spec: self.prop.wavelength,
            });
        }
        self.slm1.validate(&self.prop.grid)?;
        self.slm2.validate(&self.prop.grid)?;
        self.camera.validate()
    }
}

/// Field leaving one SLM: `[η·exp(iφ') + (1-η)]·u_src`, then laterally shifted.
///
/// `φ'` is the commanded phase after LUT distortion, quantization and the
/// tilt ramp (taken about the grid center).
pub fn slm_field(
    phi: &PhasePattern,
    slm: &SlmProfile,
    source: &ComplexField,
) -> Result<ComplexField> {
    source.grid().check_same(phi.grid())?;
    slm.validate(phi.grid())?;
    let mut shifter = slm
        .has_lateral_shift()
        .then(|| Fft2::new(phi.grid().ny, phi.grid().nx));
    let data = slm_field_data(phi, slm, source.data(), shifter.as_mut());
    Ok(ComplexField::from_parts_unchecked(
        *phi.grid(),
        data,
        source.wavelength(),
    ))
}

fn slm_field_data(
    phi: &PhasePattern,
    slm: &SlmProfile,
    source: &Array2<Complex64>,
    shifter: Option<&mut Fft2>,
) -> Array2<Complex64> {
    let grid = phi.grid();
    let (cx, cy) = ((grid.nx / 2) as f64, (grid.ny / 2) as f64);
    let [tx, ty] = slm.tilt;
    let eta = slm.eta;
    let undiffracted = Complex64::new(1.0 - eta, 0.0);
    let mut out = Array2::from_shape_fn(grid.shape(), |(y, x)| {
        let p = slm.displayed_phase(phi.phase()[[y, x]])
            + tx * (x as f64 - cx)
            + ty * (y as f64 - cy);
        (Complex64::from_polar(eta, p) + undiffracted) * source[[y, x]]
    });
    if let Some(fft) = shifter {
        fourier_shift(&mut out, slm.lateral_shift, fft);
    }
    out
}

/// Translates `data` by `(dx, dy)` pixels (content at `x` moves to `x + dx`)
/// with the Fourier shift theorem; exact for band-limited periodic data.
pub fn fourier_shift(data: &mut Array2<Complex64>, shift: [f64; 2], fft: &mut Fft2) {
    let (ny, nx) = data.dim();
    let fx = signed_bin_freqs(nx);
    let fy = signed_bin_freqs(ny);
    fft.forward(data);
    let scale = 1.0 / (nx * ny) as f64;
    let [dx, dy] = shift;
    for ((y, x), v) in data.indexed_iter_mut() {
        let ph = -TAU * (fx[x] * dx + fy[y] * dy);
        *v *= Complex64::from_polar(scale, ph);
    }
    fft.inverse(data);
}

/// Cycles per pixel of natural-order DFT bins, Nyquist taken as negative.
fn signed_bin_freqs(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = if k >= n - n / 2 { k as f64 - n as f64 } else { k as f64 };
            k / n as f64
        })
        .collect()
}

/// Planned emulator for one [`HardwareProfile`]; owns per-worker FFT state.
#[derive(Debug, Clone)]
pub struct EmulatedHardware {
    profile: HardwareProfile,
    prop1: Propagator,
    prop2: Propagator,
    shifter: Fft2,
}

impl EmulatedHardware {
    pub fn new(profile: HardwareProfile) -> Result<Self> {
        profile.validate()?;
        let z = profile.prop.distance;
        let prop1 = Propagator::new(profile.prop.with_distance(z + profile.slm1.axial_shift))?;
        let prop2 = Propagator::new(profile.prop.with_distance(z + profile.slm2.axial_shift))?;
        let shifter = Fft2::new(profile.prop.grid.ny, profile.prop.grid.nx);
        Ok(Self {
            profile,
            prop1,
            prop2,
            shifter,
        })
    }

    pub fn profile(&self) -> &HardwareProfile {
        &self.profile
    }

    pub fn grid(&self) -> &GridSpec {
        &self.profile.prop.grid
    }

    /// Noise-free complex field at the target plane. `None` blocks that SLM's path.
    pub fn target_field(
        &mut self,
        phi1: Option<&PhasePattern>,
        phi2: Option<&PhasePattern>,
    ) -> Result<Array2<Complex64>> {
        let grid = *self.grid();
        for phi in [phi1, phi2].into_iter().flatten() {
            grid.check_same(phi.grid())?;
        }
        let src = self.profile.source.data();
        let u1 = phi1.map(|p| {
            let shifter = self.profile.slm1.has_lateral_shift().then_some(&mut self.shifter);
            slm_field_data(p, &self.profile.slm1, src, shifter)
        });
        let u2 = phi2.map(|p| {
            let shifter = self.profile.slm2.has_lateral_shift().then_some(&mut self.shifter);
            slm_field_data(p, &self.profile.slm2, src, shifter)
        });
        let same_path = self.profile.slm1.axial_shift == self.profile.slm2.axial_shift;
        Ok(match (u1, u2) {
            (Some(a), Some(b)) if same_path => self.prop1.apply(&(a + b), false),
            (Some(a), Some(b)) => self.prop1.apply(&a, false) + self.prop2.apply(&b, false),
            (Some(a), None) => self.prop1.apply(&a, false),
            (None, Some(b)) => self.prop2.apply(&b, false),
            (None, None) => Array2::zeros(grid.shape()),
        })
    }

    /// Camera frame: exposure-scaled intensity with seeded noise, clamping and
    /// quantization. `call_index` selects the noise stream, so a given
    /// `(rng_seed, call_index)` pair always yields the same frame.
    pub fn capture(
        &mut self,
        phi1: Option<&PhasePattern>,
        phi2: Option<&PhasePattern>,
        call_index: u64,
    ) -> Result<Array2<f64>> {
        let field = self.target_field(phi1, phi2)?;
        Ok(self.sense(&field, call_index))
    }

    /// Applies the camera model to a target-plane field.
    pub fn sense(&self, field: &Array2<Complex64>, call_index: u64) -> Array2<f64> {
        let cam = &self.profile.camera;
        let mut img = field.mapv(|c| cam.exposure_scale * c.norm_sqr());
        if cam.noise_sigma > 0.0 {
            let peak = img.iter().cloned().fold(0.0, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(self.profile.rng_seed);
            rng.set_stream(call_index);
            let normal = Normal::new(0.0, cam.noise_sigma * peak)
                .expect("noise std is finite and non-negative");
            img.mapv_inplace(|v| v + normal.sample(&mut rng));
        }
        img.mapv_inplace(|v| v.max(0.0));
        if let BitDepth::Bits(b) = cam.bit_depth {
            let full = ((1u64 << b) - 1) as f64;
            img.mapv_inplace(|v| (v.min(1.0) * full).round() / full);
        }
        img
    }

    /// Square root of [`EmulatedHardware::capture`].
    pub fn captured_amplitude(
        &mut self,
        phi1: Option<&PhasePattern>,
        phi2: Option<&PhasePattern>,
        call_index: u64,
    ) -> Result<Array2<f64>> {
        Ok(self.capture(phi1, phi2, call_index)?.mapv(f64::sqrt))
    }
}

/// Intensity at the target plane for a dual-SLM pattern pair.
pub fn capture(
    phi1: &PhasePattern,
    phi2: &PhasePattern,
    hw: &HardwareProfile,
    call_index: u64,
) -> Result<Array2<f64>> {
    EmulatedHardware::new(hw.clone())?.capture(Some(phi1), Some(phi2), call_index)
}

/// `sqrt` of [`capture`]: the amplitude the camera-in-the-loop solver consumes.
pub fn captured_amplitude(
    phi1: &PhasePattern,
    phi2: &PhasePattern,
    hw: &HardwareProfile,
    call_index: u64,
) -> Result<Array2<f64>> {
    Ok(capture(phi1, phi2, hw, call_index)?.mapv(f64::sqrt))
}

/// One physical measurement returned by a [`CaptureBackend`].
#[derive(Debug, Clone)]
pub struct Capture {
    /// Captured amplitude, `sqrt` of the sensor intensity.
    pub amplitude: Array2<f64>,
    /// Complex target-plane field, for backends able to observe it.
    pub field: Option<Array2<Complex64>>,
}

/// The single entry point through which solvers touch the physical display.
///
/// The emulator implements it here; a real SLM + camera rig can implement it
/// without any solver change.
pub trait CaptureBackend {
    fn grid(&self) -> &GridSpec;

    /// Displays `phi1` (and `phi2`, when the setup has a second SLM) and returns
    /// the resulting measurement.
    fn capture(&mut self, phi1: &PhasePattern, phi2: Option<&PhasePattern>) -> Result<Capture>;

    /// Number of hardware calls made so far.
    fn calls(&self) -> u64;
}

/// [`CaptureBackend`] over [`EmulatedHardware`], numbering calls from zero.
#[derive(Debug, Clone)]
pub struct EmulatedCamera {
    hw: EmulatedHardware,
    calls: u64,
    expose_field: bool,
}

impl EmulatedCamera {
    pub fn new(hw: EmulatedHardware) -> Self {
        Self {
            hw,
            calls: 0,
            expose_field: true,
        }
    }

    /// Restricts the backend to intensity-only frames, like a plain sensor.
    pub fn intensity_only(mut self) -> Self {
        self.expose_field = false;
        self
    }

    pub fn hardware(&self) -> &EmulatedHardware {
        &self.hw
    }

    pub fn hardware_mut(&mut self) -> &mut EmulatedHardware {
        &mut self.hw
    }
}

impl CaptureBackend for EmulatedCamera {
    fn grid(&self) -> &GridSpec {
        self.hw.grid()
    }

    fn capture(&mut self, phi1: &PhasePattern, phi2: Option<&PhasePattern>) -> Result<Capture> {
        let field = self.hw.target_field(Some(phi1), phi2)?;
        let amplitude = self.hw.sense(&field, self.calls).mapv(f64::sqrt);
        self.calls += 1;
        let scale = self.hw.profile().camera.exposure_scale.sqrt();
        Ok(Capture {
            amplitude,
            field: self.expose_field.then(|| field.mapv(|c| c * scale)),
        })
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Quantizes a phase to `levels` equal steps over `[0, 2π)`.
pub fn quantize_phase(phi: f64, levels: u32) -> f64 {
    SlmProfile {
        phase_levels: PhaseLevels::Discrete(levels),
        ..SlmProfile::ideal()
    }
    .displayed_phase(phi)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, n, 6.4e-6).unwrap()
    }

    fn unit_source(n: usize) -> ComplexField {
        ComplexField::constant(grid(n), Complex64::new(1.0, 0.0), 520e-9).unwrap()
    }

    fn assert_const(f: &ComplexField, want: Complex64, tol: f64) {
        for c in f.data().iter() {
            assert!((c - want).norm() < tol, "{c} != {want}");
        }
    }

    #[test]
    fn perfect_mirror_passes_source() {
        let phi = PhasePattern::zeros(grid(8));
        let u = slm_field(&phi, &SlmProfile::ideal(), &unit_source(8)).unwrap();
        assert_const(&u, Complex64::new(1.0, 0.0), 1e-15);
    }

    #[test]
    fn efficiency_mixes_undiffracted_term() {
        let phi = PhasePattern::constant(grid(8), PI).unwrap();
        let u = slm_field(&phi, &SlmProfile::ideal().with_eta(0.8), &unit_source(8)).unwrap();
        assert_const(&u, Complex64::new(-0.6, 0.0), 1e-12);
        let u = slm_field(&phi, &SlmProfile::ideal().with_eta(0.5), &unit_source(8)).unwrap();
        assert_const(&u, Complex64::new(0.0, 0.0), 1e-12);
    }

    #[test]
    fn quantization_rounds_to_nearest_level() {
        let step = TAU / 4.0;
        assert_eq!(quantize_phase(0.49 * step, 4), 0.0);
        assert_eq!(quantize_phase(0.51 * step, 4), step);
        // rounds up past the last level back to zero
        assert_eq!(quantize_phase(TAU - 0.1 * step, 4), 0.0);
        assert_eq!(quantize_phase(-0.9 * step, 4), 3.0 * step);
    }

    #[test]
    fn lut_nonlinearity_is_monotone_and_fixes_endpoints() {
        for k in [-1.0, -0.3, 0.7, 2.0] {
            let slm = SlmProfile {
                lut_nonlinearity: k,
                ..SlmProfile::ideal()
            };
            let mut prev = -1.0;
            for i in 0..1000 {
                let p = slm.displayed_phase(TAU * i as f64 / 1000.0);
                assert!(p >= prev - 1e-12);
                prev = p;
            }
            assert_eq!(slm.displayed_phase(0.0), 0.0);
            assert!((slm.displayed_phase(PI) - PI).abs() < 1e-12);
        }
        let bad = SlmProfile {
            lut_nonlinearity: 2.5,
            ..SlmProfile::ideal()
        };
        assert!(bad.validate(&grid(8)).is_err());
    }

    #[test]
    fn integer_lateral_shift_rolls_field() {
        let g = grid(8);
        let phi = PhasePattern::new(
            g,
            Array2::from_shape_fn((8, 8), |(y, x)| (3 * x + 5 * y) as f64 * 0.1),
        )
        .unwrap();
        let slm = SlmProfile {
            lateral_shift: [2.0, -1.0],
            ..SlmProfile::ideal()
        };
        let shifted = slm_field(&phi, &slm, &unit_source(8)).unwrap();
        let plain = slm_field(&phi, &SlmProfile::ideal(), &unit_source(8)).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let src = plain.data()[[(y + 1) % 8, (x + 6) % 8]];
                assert!((shifted.data()[[y, x]] - src).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_validation() {
        let g = grid(16);
        assert!(SlmProfile::ideal().with_eta(1.2).validate(&g).is_err());
        let far = SlmProfile {
            lateral_shift: [4.5, 0.0],
            ..SlmProfile::ideal()
        };
        assert!(far.validate(&g).is_err());
        let cam = CameraProfile {
            exposure_scale: 0.0,
            ..CameraProfile::default()
        };
        assert!(cam.validate().is_err());
    }

    #[test]
    fn serde_accepts_named_and_numeric_levels() {
        let s: SlmProfile =
            serde_json::from_str(r#"{"eta":0.8,"phase_levels":"continuous"}"#).unwrap();
        assert_eq!(s.phase_levels, PhaseLevels::CONTINUOUS);
        let s: SlmProfile = serde_json::from_str(r#"{"phase_levels":64}"#).unwrap();
        assert_eq!(s.phase_levels, PhaseLevels::Discrete(64));
        let c: CameraProfile = serde_json::from_str(r#"{"bit_depth":"ideal"}"#).unwrap();
        assert_eq!(c.bit_depth, BitDepth::IDEAL);
        assert!(serde_json::from_str::<SlmProfile>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn camera_quantizes_and_clips() {
        let prop = PropagationSpec::new(520e-9, 0.0, grid(4), 1).unwrap();
        let mut hw = HardwareProfile::ideal(prop).unwrap();
        hw.camera.bit_depth = BitDepth::Bits(2);
        let emu = EmulatedHardware::new(hw).unwrap();
        let field = Array2::from_shape_fn((4, 4), |(y, _)| Complex64::new(0.35 * y as f64, 0.0));
        let img = emu.sense(&field, 0);
        // 0, 0.1225, 0.49, 1.1025 on a 3-step scale
        assert_eq!(img[[0, 0]], 0.0);
        assert_eq!(img[[1, 0]], 0.0);
        assert!((img[[2, 0]] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(img[[3, 0]], 1.0);
    }
}
