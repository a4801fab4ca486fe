//! Synthetic target images: resolution chart, sinusoidal grating, dot grid.

use std::f64::consts::TAU;

use ndarray::{s, Array2};

use crate::error::Result;
use crate::field::{GridSpec, TargetAmplitude};
use crate::metrics::Axis2;

/// Bar-group resolution chart on a dark background.
///
/// Three groups of vertical bars and three of horizontal bars with widths
/// from 1/64 to 1/16 of the grid, plus a solid square. Intensity is binary.
pub fn resolution_chart(grid: GridSpec) -> Result<TargetAmplitude> {
    grid.validate()?;
    let (ny, nx) = grid.shape();
    let mut img = Array2::<f64>::zeros((ny, nx));
    let unit = (nx.min(ny) / 64).max(1);
    let widths = [unit, 2 * unit, 4 * unit];
    let bar_len = ny / 4;

    // vertical bars, top-left quadrant
    let mut x = nx / 16;
    let y0 = ny / 16;
    for &w in &widths {
        for _ in 0..3 {
            if x + w <= nx {
                img.slice_mut(s![y0..(y0 + bar_len).min(ny), x..x + w]).fill(1.0);
            }
            x += 2 * w;
        }
        x += 2 * w;
    }

    // horizontal bars, bottom-left quadrant
    let mut y = ny / 2 + ny / 16;
    let x0 = nx / 16;
    for &w in &widths {
        for _ in 0..3 {
            if y + w <= ny {
                img.slice_mut(s![y..y + w, x0..(x0 + nx / 4).min(nx)]).fill(1.0);
            }
            y += 2 * w;
        }
        y += 2 * w;
    }

    // solid square, right half
    let side = nx.min(ny) / 4;
    let (sy, sx) = (ny / 2 - side / 2, nx / 2 + nx / 8);
    img.slice_mut(s![sy..(sy + side).min(ny), sx..(sx + side).min(nx)]).fill(1.0);

    TargetAmplitude::from_intensity(grid, &img)
}

/// Intensity grating `0.5 + 0.5·cos(2πu/period)` along `axis`, `u` in pixels.
pub fn sinusoid_grating(grid: GridSpec, period: f64, axis: Axis2) -> Result<TargetAmplitude> {
    grid.validate()?;
    let img = Array2::from_shape_fn(grid.shape(), |(y, x)| {
        let u = match axis {
            Axis2::X => x,
            Axis2::Y => y,
        } as f64;
        0.5 + 0.5 * (TAU * u / period).cos()
    });
    TargetAmplitude::from_intensity(grid, &img)
}

/// Square lattice of round dots, `spacing` pixels apart, first dot offset by
/// half a spacing from the corner.
pub fn dot_grid(grid: GridSpec, spacing: usize, radius: f64) -> Result<TargetAmplitude> {
    grid.validate()?;
    let spacing = spacing.max(2);
    let half = spacing as f64 / 2.0;
    let img = Array2::from_shape_fn(grid.shape(), |(y, x)| {
        let dx = (x % spacing) as f64 - half;
        let dy = (y % spacing) as f64 - half;
        if dx * dx + dy * dy <= radius * radius {
            1.0
        } else {
            0.0
        }
    });
    TargetAmplitude::from_intensity(grid, &img)
}
