//! Image quality and contrast metrics.

use ndarray::{Array2, ArrayView1, Axis, Zip};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cgh::objective::closed_form_scale;
use crate::error::{HoloError, Result};
use crate::field::TargetAmplitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PsnrMode {
    Amplitude,
    #[default]
    Intensity,
}

/// `10·log10(1/MSE)` against a max-1 target; `+∞` when the images match.
///
/// `reconstruction` is compared as-is, in the domain named by `mode`
/// (amplitude against `a`, intensity against `a²`). Scale it first, e.g. with
/// [`scaled_psnr`].
pub fn psnr(reconstruction: &Array2<f64>, target: &TargetAmplitude, mode: PsnrMode) -> Result<f64> {
    target.grid().check_shape(reconstruction)?;
    let n = reconstruction.len() as f64;
    let mse = Zip::from(reconstruction)
        .and(target.amplitude())
        .fold(0.0, |acc, &r, &a| {
            let t = match mode {
                PsnrMode::Amplitude => a,
                PsnrMode::Intensity => a * a,
            };
            acc + (r - t).powi(2)
        })
        / n;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// PSNR of an amplitude image after the closed-form scale `s` used by the
/// loss is applied; in intensity mode `(s·A)²` is compared with `a²`.
pub fn scaled_psnr(amplitude: &Array2<f64>, target: &TargetAmplitude, mode: PsnrMode) -> Result<f64> {
    target.grid().check_shape(amplitude)?;
    let s = closed_form_scale(amplitude, target.amplitude()).unwrap_or(0.0);
    let rec = match mode {
        PsnrMode::Amplitude => amplitude.mapv(|a| s * a),
        PsnrMode::Intensity => amplitude.mapv(|a| (s * a).powi(2)),
    };
    psnr(&rec, target, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    /// `(I_max - I_min)/I_min`, `+∞` when `I_min <= 0`.
    pub weber: f64,
    /// `(I_max - I_min)/(I_max + I_min)`.
    pub michelson: f64,
    pub i_max: f64,
    pub i_min: f64,
}

impl ContrastReport {
    pub fn from_extrema(i_max: f64, i_min: f64) -> Self {
        let weber = if i_min > 0.0 {
            (i_max - i_min) / i_min
        } else {
            f64::INFINITY
        };
        let sum = i_max + i_min;
        let michelson = if sum > 0.0 { (i_max - i_min) / sum } else { 0.0 };
        Self {
            weber,
            michelson,
            i_max,
            i_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis2 {
    X,
    Y,
}

/// Percentile-based extrema of a captured sinusoidal grating.
///
/// The image is averaged across the axis orthogonal to the grating, split into
/// whole periods, and `I_max`/`I_min` are the means over periods of each
/// period's 95th/5th percentile.
pub fn contrast_from_sinusoid(captured: &Array2<f64>, period: f64, axis: Axis2) -> Result<ContrastReport> {
    let profile = match axis {
        // columns vary along x: average over rows
        Axis2::X => captured.mean_axis(Axis(0)),
        Axis2::Y => captured.mean_axis(Axis(1)),
    }
    .ok_or_else(|| HoloError::InvalidParameter("empty image".into()))?;
    contrast_from_profile(profile.view(), period)
}

fn contrast_from_profile(profile: ArrayView1<f64>, period: f64) -> Result<ContrastReport> {
    let len = profile.len();
    if !(period.is_finite() && period >= 2.0) || period > len as f64 {
        return Err(HoloError::InvalidParameter(format!(
            "period {period} px does not fit a {len} px profile"
        )));
    }
    let periods = (len as f64 / period).floor() as usize;
    if periods < 3 {
        return Err(HoloError::InvalidParameter(format!(
            "need at least 3 full periods, profile holds {periods}"
        )));
    }
    let (mut hi, mut lo) = (0.0, 0.0);
    for p in 0..periods {
        let start = (p as f64 * period).round() as usize;
        let end = (((p + 1) as f64 * period).round() as usize).min(len);
        let mut chunk: Vec<f64> = profile.iter().skip(start).take(end - start).cloned().collect();
        chunk.sort_by(f64::total_cmp);
        hi += percentile_sorted(&chunk, 0.95);
        lo += percentile_sorted(&chunk, 0.05);
    }
    let n = periods as f64;
    Ok(ContrastReport::from_extrema(hi / n, lo / n))
}

/// Nearest-rank percentile of sorted data; for fewer than 20 samples the 5th
/// and 95th percentiles are the plain extrema.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Strongest non-DC component of an image's profile along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// DFT bin of the peak, in `1..=len/2`.
    pub bin: usize,
    pub period_px: f64,
    /// Share of the profile's non-DC power carried by the peak bin pair.
    pub fraction: f64,
}

/// Averages `img` across the axis orthogonal to `axis` and finds the dominant
/// spatial frequency of the resulting profile.
pub fn spectral_peak(img: &Array2<f64>, axis: Axis2) -> Result<SpectralPeak> {
    let power = profile_power(img, axis)?;
    let len = power.len();
    let (bin, _) = (1..=len / 2)
        .map(|k| (k, power[k]))
        .fold((1, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(SpectralPeak {
        bin,
        period_px: len as f64 / bin as f64,
        fraction: bin_fraction(&power, bin),
    })
}

/// Share of non-DC profile power at DFT bin `bin` (and its mirror).
pub fn spectral_fraction(img: &Array2<f64>, axis: Axis2, bin: usize) -> Result<f64> {
    let power = profile_power(img, axis)?;
    if bin == 0 || bin > power.len() / 2 {
        return Err(HoloError::InvalidParameter(format!("bin {bin} is out of range")));
    }
    Ok(bin_fraction(&power, bin))
}

fn profile_power(img: &Array2<f64>, axis: Axis2) -> Result<Vec<f64>> {
    let profile = match axis {
        Axis2::X => img.mean_axis(Axis(0)),
        Axis2::Y => img.mean_axis(Axis(1)),
    }
    .ok_or_else(|| HoloError::InvalidParameter("empty image".into()))?;
    let len = profile.len();
    if len < 4 {
        return Err(HoloError::InvalidParameter("profile shorter than 4 samples".into()));
    }
    let mut buf: Vec<Complex64> = profile.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    Ok(buf.iter().map(|c| c.norm_sqr()).collect())
}

fn bin_fraction(power: &[f64], bin: usize) -> f64 {
    let total: f64 = power[1..].iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mirror = power.len() - bin;
    let peak = if mirror == bin { power[bin] } else { power[bin] + power[mirror] };
    peak / total
}
