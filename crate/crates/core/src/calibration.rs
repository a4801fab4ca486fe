//! Inter-SLM registration: sub-pixel shift estimation between the two SLMs'
//! target-plane contributions, and pre-compensation of a phase pattern.

use std::f64::consts::TAU;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cgh::{sgd_solve, SolverConfig};
use crate::error::{HoloError, Result};
use crate::fft::Fft2;
use crate::field::{wrap_phase, PhasePattern};
use crate::hardware::EmulatedHardware;
use crate::propagation::PropagationSpec;
use crate::targets::dot_grid;

/// Estimates below this confidence are rejected.
pub const MIN_CONFIDENCE: f64 = 0.1;

/// Refinement resolution, in fractions of a pixel.
const UPSAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEstimate {
    pub dx: f64,
    pub dy: f64,
    /// Height of the normalized phase-correlation peak, in `[0, 1]`.
    pub confidence: f64,
}

impl AlignmentEstimate {
    pub const IDENTITY: Self = Self {
        dx: 0.0,
        dy: 0.0,
        confidence: 1.0,
    };
}

/// Translation that carries `img_a` onto `img_b` (`img_b(x) ≈ img_a(x - d)`).
///
/// Phase correlation locates the integer peak; the normalized cross-power
/// spectrum is then evaluated on a `1/100` px lattice around it by a
/// matrix-product DFT, and a parabola through the finest samples gives the
/// final offset.
pub fn estimate_shift(img_a: &Array2<f64>, img_b: &Array2<f64>) -> Result<AlignmentEstimate> {
    if img_a.dim() != img_b.dim() {
        return Err(HoloError::InvalidParameter(format!(
            "images differ in shape: {:?} vs {:?}",
            img_a.dim(),
            img_b.dim()
        )));
    }
    let (ny, nx) = img_a.dim();
    if nx < 2 || ny < 2 {
        return Err(HoloError::InvalidParameter("images must be at least 2x2".into()));
    }
    if img_a.iter().chain(img_b.iter()).any(|v| !v.is_finite()) {
        return Err(HoloError::NonFinite("calibration image"));
    }

    let mut fft = Fft2::new(ny, nx);
    let mut fa = img_a.mapv(|v| Complex64::new(v, 0.0));
    let mut fb = img_b.mapv(|v| Complex64::new(v, 0.0));
    fft.forward(&mut fa);
    fft.forward(&mut fb);

    let mut cross = Zip::from(&fb).and(&fa).map_collect(|b, a| b * a.conj());
    let max = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Err(HoloError::CalibrationFailed {
            confidence: 0.0,
            threshold: MIN_CONFIDENCE,
        });
    }
    let mut support = 0usize;
    cross.mapv_inplace(|c| {
        let m = c.norm();
        if m > 1e-12 * max {
            support += 1;
            c / m
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let norm = 1.0 / support as f64;

    let mut corr = cross.clone();
    fft.inverse(&mut corr);
    let best = corr.iter().map(|c| c.re).fold(f64::MIN, f64::max);
    // periodic patterns correlate equally at every lattice translate; take
    // the smallest displacement among the tied peaks
    let tie = best - 1e-6 * best.abs();
    let mut coarse = [0.0, 0.0];
    let mut radius = f64::INFINITY;
    for ((y, x), c) in corr.indexed_iter() {
        if c.re >= tie {
            let d = [signed_index(x, nx), signed_index(y, ny)];
            let r = d[0].hypot(d[1]);
            if r < radius {
                radius = r;
                coarse = d;
            }
        }
    }

    let half = (3 * UPSAMPLE) / 4;
    let count = 2 * half + 1;
    let offsets: Vec<f64> = (0..count)
        .map(|j| (j as f64 - half as f64) / UPSAMPLE as f64)
        .collect();
    let ex = dft_kernel(nx, coarse[0], &offsets);
    let ey = dft_kernel(ny, coarse[1], &offsets).reversed_axes();
    // (count × ny)·(ny × nx)·(nx × count)
    let fine = ey.dot(&cross).dot(&ex).mapv(|c| c.re * norm);

    let (mut jy, mut jx, mut peak) = (0, 0, f64::MIN);
    for ((y, x), &v) in fine.indexed_iter() {
        if v > peak {
            peak = v;
            jy = y;
            jx = x;
        }
    }
    let step = 1.0 / UPSAMPLE as f64;
    let dx = coarse[0] + offsets[jx] + step * parabolic_offset(fine.row(jy).to_vec(), jx);
    let dy = coarse[1] + offsets[jy] + step * parabolic_offset(fine.column(jx).to_vec(), jy);
    let confidence = peak.clamp(0.0, 1.0);
    if confidence < MIN_CONFIDENCE {
        return Err(HoloError::CalibrationFailed {
            confidence,
            threshold: MIN_CONFIDENCE,
        });
    }
    Ok(AlignmentEstimate { dx, dy, confidence })
}

fn signed_index(k: usize, n: usize) -> f64 {
    if k > n / 2 {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

/// `exp(i2π f·(c + o))` for natural-order bins `f` (rows) and offsets `o` (columns).
fn dft_kernel(n: usize, center: f64, offsets: &[f64]) -> Array2<Complex64> {
    let freqs: Vec<f64> = (0..n).map(|k| signed_index(k, n) / n as f64).collect();
    Array2::from_shape_fn((n, offsets.len()), |(k, j)| {
        Complex64::from_polar(1.0, TAU * freqs[k] * (center + offsets[j]))
    })
}

/// Vertex of the parabola through `v[i-1], v[i], v[i+1]`, relative to `i`.
fn parabolic_offset(v: Vec<f64>, i: usize) -> f64 {
    if i == 0 || i + 1 >= v.len() {
        return 0.0;
    }
    let (l, c, r) = (v[i - 1], v[i], v[i + 1]);
    let den = l - 2.0 * c + r;
    if den >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / den).clamp(-0.5, 0.5)
}

/// Resamples `phi` by `(-dx, -dy)` so content registered at `x + d` moves back
/// to `x`. Interpolation is bilinear on `exp(iφ)` with circular wrap; integer
/// shifts reduce to an exact roll.
pub fn apply_alignment(phi: &PhasePattern, est: &AlignmentEstimate) -> PhasePattern {
    let (ny, nx) = phi.grid().shape();
    let (ix, fx) = split(est.dx);
    let (iy, fy) = split(est.dy);
    let src = phi.phase();
    let at = |y: usize, x: usize, oy: i64, ox: i64| {
        let yy = (y as i64 + oy).rem_euclid(ny as i64) as usize;
        let xx = (x as i64 + ox).rem_euclid(nx as i64) as usize;
        src[[yy, xx]]
    };
    let phase = if fx == 0.0 && fy == 0.0 {
        Array2::from_shape_fn((ny, nx), |(y, x)| at(y, x, iy, ix))
    } else {
        Array2::from_shape_fn((ny, nx), |(y, x)| {
            let p = |oy, ox| Complex64::from_polar(1.0, at(y, x, iy + oy, ix + ox));
            let top = p(0, 0) * (1.0 - fx) + p(0, 1) * fx;
            let bottom = p(1, 0) * (1.0 - fx) + p(1, 1) * fx;
            wrap_phase((top * (1.0 - fy) + bottom * fy).arg())
        })
    };
    PhasePattern::from_parts_unchecked(*phi.grid(), phase)
}

fn split(v: f64) -> (i64, f64) {
    let i = v.floor();
    (i as i64, v - i)
}

/// Single-SLM phase pattern whose image is a lattice of dots, used as the
/// calibration test pattern.
pub fn dot_grid_pattern(prop: &PropagationSpec, spacing: usize, radius: f64) -> Result<PhasePattern> {
    let target = dot_grid(prop.grid, spacing, radius)?;
    let config = SolverConfig {
        iterations: 100,
        ..SolverConfig::default()
    };
    Ok(sgd_solve(&target, prop, &config, false)?.phi1)
}

/// Displays `pattern` on each SLM with the other path blocked and estimates
/// where SLM 2's image sits relative to SLM 1's.
pub fn calibrate_pair(hw: &mut EmulatedHardware, pattern: &PhasePattern) -> Result<AlignmentEstimate> {
    let a = hw.capture(Some(pattern), None, 0)?;
    let b = hw.capture(None, Some(pattern), 1)?;
    estimate_shift(&a, &b)
}
