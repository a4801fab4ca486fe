//! Target loading and PNG output.

use std::path::Path;

use image::{imageops::FilterType, DynamicImage, GrayImage, ImageBuffer, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{HoloError, Result};
use crate::field::{GridSpec, TargetAmplitude};

/// Which plane of the file to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Luma of color images; grayscale images as-is.
    #[default]
    Gray,
    Red,
    Green,
    Blue,
}

impl Channel {
    pub fn rgb(index: usize) -> Self {
        match index {
            0 => Channel::Red,
            1 => Channel::Green,
            _ => Channel::Blue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    pub channel: Channel,
    /// Decode the sRGB transfer curve instead of treating values as linear.
    pub srgb: bool,
}

/// Loads a target with the default options (gray, linear values).
pub fn load_target(path: &Path, grid: GridSpec) -> Result<TargetAmplitude> {
    load_target_with(path, grid, LoadOptions::default())
}

/// Reads an 8/16-bit PNG or PGM, fits it into `grid` (downscaling to fit,
/// then zero-padding around the center) and converts intensity to amplitude.
pub fn load_target_with(path: &Path, grid: GridSpec, opts: LoadOptions) -> Result<TargetAmplitude> {
    grid.validate()?;
    let img = image::open(path).map_err(|source| HoloError::ImageRead {
        path: path.to_path_buf(),
        source,
    })?;
    let plane = extract_plane(&img, opts.channel);
    let fitted = fit_to_grid(plane, grid);
    let intensity = fitted.mapv(|v| if opts.srgb { srgb_to_linear(v) } else { v });
    if intensity.iter().all(|&v| v <= 0.0) {
        return Err(HoloError::BlackTarget(path.to_path_buf()));
    }
    TargetAmplitude::from_intensity(grid, &intensity)
}

/// `true` if the file has color channels.
pub fn is_color(path: &Path) -> Result<bool> {
    let img = image::open(path).map_err(|source| HoloError::ImageRead {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.color().has_color())
}

/// Plane as 32-bit float in `[0, 1]`, shape `(h, w)`.
fn extract_plane(img: &DynamicImage, channel: Channel) -> Array2<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let index = match channel {
        Channel::Gray if img.color().has_color() => None,
        Channel::Gray | Channel::Red => Some(0),
        Channel::Green => Some(1),
        Channel::Blue => Some(2),
    };
    if !img.color().has_color() {
        let g = img.to_luma32f();
        return Array2::from_shape_fn((h, w), |(y, x)| g.get_pixel(x as u32, y as u32)[0]);
    }
    let rgb = img.to_rgb32f();
    Array2::from_shape_fn((h, w), |(y, x)| {
        let p = rgb.get_pixel(x as u32, y as u32);
        match index {
            Some(i) => p[i],
            // Rec. 709 luma
            None => 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2],
        }
    })
}

fn fit_to_grid(plane: Array2<f32>, grid: GridSpec) -> Array2<f64> {
    let (h, w) = plane.dim();
    let plane = if w > grid.nx || h > grid.ny {
        let scale = (grid.nx as f64 / w as f64).min(grid.ny as f64 / h as f64);
        let nw = ((w as f64 * scale).round() as u32).clamp(1, grid.nx as u32);
        let nh = ((h as f64 * scale).round() as u32).clamp(1, grid.ny as u32);
        let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
            ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([plane[[y as usize, x as usize]]]));
        let small = image::imageops::resize(&buf, nw, nh, FilterType::Triangle);
        Array2::from_shape_fn((nh as usize, nw as usize), |(y, x)| {
            small.get_pixel(x as u32, y as u32)[0]
        })
    } else {
        plane
    };
    let (h, w) = plane.dim();
    let (oy, ox) = ((grid.ny - h) / 2, (grid.nx - w) / 2);
    let mut out = Array2::zeros(grid.shape());
    for ((y, x), &v) in plane.indexed_iter() {
        out[[y + oy, x + ox]] = f64::from(v).clamp(0.0, 1.0);
    }
    out
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Writes intensities clamped to `[0, 1]` as an 8-bit grayscale PNG.
pub fn save_intensity_png(path: &Path, intensity: &Array2<f64>) -> Result<()> {
    let (h, w) = intensity.dim();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = intensity[[y as usize, x as usize]];
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        Luma([(v * 255.0).round() as u8])
    });
    img.save(path).map_err(|source| HoloError::ImageWrite {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes an RGB composite from three intensity planes, each clamped to `[0, 1]`.
pub fn save_rgb_png(path: &Path, planes: [&Array2<f64>; 3]) -> Result<()> {
    let (h, w) = planes[0].dim();
    let img = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let px = |p: &Array2<f64>| {
            let v = p[[y as usize, x as usize]];
            (if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 } * 255.0).round() as u8
        };
        image::Rgb([px(planes[0]), px(planes[1]), px(planes[2])])
    });
    img.save(path).map_err(|source| HoloError::ImageWrite {
        path: path.to_path_buf(),
        source,
    })
}
