//! Double phase-amplitude coding.
//!
//! A complex SLM-plane field `a·exp(iφ)` with `a ≤ 1` equals the mean of the two
//! phase-only fields `exp(i(φ ∓ acos a))`.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HoloError, Result};
use crate::field::{wrap_phase, ComplexField, GridSpec, PhasePattern, TargetAmplitude};
use crate::propagation::{PropagationSpec, Propagator};

/// Phase assigned to the target amplitude before back-propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetPhase {
    Zero,
    /// Converging spherical phase `-π r²/(λ f)` about the grid center; `f`
    /// defaults to the propagation distance.
    #[default]
    Quadratic,
    QuadraticFocal(f64),
}

impl TargetPhase {
    pub fn pattern(&self, prop: &PropagationSpec) -> PhasePattern {
        let grid = prop.grid;
        let focal = match *self {
            TargetPhase::Zero => return PhasePattern::zeros(grid),
            TargetPhase::Quadratic => prop.distance,
            TargetPhase::QuadraticFocal(f) => f,
        };
        let (cx, cy) = ((grid.nx / 2) as f64, (grid.ny / 2) as f64);
        let k = -PI / (prop.wavelength * focal);
        let phase = Array2::from_shape_fn(grid.shape(), |(y, x)| {
            let dx = (x as f64 - cx) * grid.pitch;
            let dy = (y as f64 - cy) * grid.pitch;
            wrap_phase(k * (dx * dx + dy * dy))
        });
        PhasePattern::from_parts_unchecked(grid, phase)
    }
}

/// Splits `u` into the two phase maps `arg(u) ∓ acos|u|`.
///
/// Requires `max|u| ≤ 1`; magnitudes are clamped to 1 against rounding.
pub fn dpac_decompose(grid: GridSpec, u: &Array2<Complex64>) -> Result<(PhasePattern, PhasePattern)> {
    grid.check_shape(u)?;
    let max = u.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max > 1.0 + 1e-12 {
        return Err(HoloError::InvalidParameter(format!(
            "double-phase decomposition needs |u| <= 1, got {max}"
        )));
    }
    let mut p1 = Array2::zeros(grid.shape());
    let mut p2 = Array2::zeros(grid.shape());
    Zip::from(&mut p1).and(&mut p2).and(u).for_each(|a, b, c| {
        let offset = c.norm().min(1.0).acos();
        let phi = c.arg();
        *a = wrap_phase(phi - offset);
        *b = wrap_phase(phi + offset);
    });
    Ok((
        PhasePattern::from_parts_unchecked(grid, p1),
        PhasePattern::from_parts_unchecked(grid, p2),
    ))
}

/// SLM-plane field for DPAC: the target field back-propagated by `-z` and
/// rescaled to unit peak amplitude.
fn slm_plane_field(
    target: &TargetAmplitude,
    target_phase: &PhasePattern,
    prop: &PropagationSpec,
) -> Result<Array2<Complex64>> {
    prop.grid.check_same(target.grid())?;
    prop.grid.check_same(target_phase.grid())?;
    let field = Zip::from(target.amplitude())
        .and(target_phase.phase())
        .map_collect(|&a, &p| Complex64::from_polar(a, p));
    let field = ComplexField::new(prop.grid, field, prop.wavelength)?;
    let mut back = Propagator::new(prop.with_distance(-prop.distance))?;
    let mut u = back.propagate(&field)?.into_data();
    let max = u.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Err(HoloError::InvalidParameter("target field is zero".into()));
    }
    u.mapv_inplace(|c| c / max);
    Ok(u)
}

/// Dual-SLM DPAC: one phase map per SLM.
pub fn dpac_dual(
    target: &TargetAmplitude,
    target_phase: &PhasePattern,
    prop: &PropagationSpec,
) -> Result<(PhasePattern, PhasePattern)> {
    let u = slm_plane_field(target, target_phase, prop)?;
    dpac_decompose(prop.grid, &u)
}

/// Single-SLM DPAC: the two maps interleaved on a checkerboard, `arg − acos`
/// on even `x + y`, `arg + acos` on odd.
pub fn dpac_single(
    target: &TargetAmplitude,
    target_phase: &PhasePattern,
    prop: &PropagationSpec,
) -> Result<PhasePattern> {
    let (p1, p2) = dpac_dual(target, target_phase, prop)?;
    Ok(interleave_checkerboard(&p1, &p2))
}

pub fn interleave_checkerboard(even: &PhasePattern, odd: &PhasePattern) -> PhasePattern {
    let phase = Array2::from_shape_fn(even.grid().shape(), |(y, x)| {
        if (x + y) % 2 == 0 {
            even.phase()[[y, x]]
        } else {
            odd.phase()[[y, x]]
        }
    });
    PhasePattern::from_parts_unchecked(*even.grid(), phase)
}
