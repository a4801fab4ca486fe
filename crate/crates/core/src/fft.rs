//! 2D FFT plumbing on top of `rustfft`.
//!
//! [`Fft2`] owns its plans and scratch space, so each worker keeps its own
//! instance. The free functions [`fft2_centered`] / [`ifft2_centered`] are the
//! unitary, DC-at-center transforms used when a spectrum is inspected directly.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::ComplexField;

pub struct Fft2 {
    ny: usize,
    nx: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("ny", &self.ny)
            .field("nx", &self.nx)
            .finish()
    }
}

impl Clone for Fft2 {
    fn clone(&self) -> Self {
        Self {
            ny: self.ny,
            nx: self.nx,
            fwd_x: Arc::clone(&self.fwd_x),
            inv_x: Arc::clone(&self.inv_x),
            fwd_y: Arc::clone(&self.fwd_y),
            inv_y: Arc::clone(&self.inv_y),
            scratch: self.scratch.clone(),
            transposed: self.transposed.clone(),
        }
    }
}

impl Fft2 {
    /// Plans transforms for arrays of shape `(ny, nx)`.
    pub fn new(ny: usize, nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            ny,
            nx,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            scratch: vec![Complex64::default(); scratch_len],
            transposed: vec![Complex64::default(); nx * ny],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    /// Unnormalized forward DFT, natural (DC-first) ordering.
    pub fn forward(&mut self, data: &mut Array2<Complex64>) {
        self.run(data, true);
    }

    /// Unnormalized inverse DFT, natural ordering.
    pub fn inverse(&mut self, data: &mut Array2<Complex64>) {
        self.run(data, false);
    }

    fn run(&mut self, data: &mut Array2<Complex64>, forward: bool) {
        assert_eq!(data.dim(), (self.ny, self.nx), "Fft2 shape mismatch");
        let (ny, nx) = (self.ny, self.nx);
        let (px, py) = if forward {
            (&self.fwd_x, &self.fwd_y)
        } else {
            (&self.inv_x, &self.inv_y)
        };
        let buf = data
            .as_slice_mut()
            .expect("field buffers are always in standard layout");
        // rows are contiguous: one call transforms all of them
        px.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, &mut self.transposed, ny, nx);
        py.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, buf, nx, ny);
    }
}

/// `src` is `rows x cols` row-major; `dst` becomes `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Circular shift: element `[y, x]` moves to `[(y + sy) % ny, (x + sx) % nx]`.
pub fn roll<T: Clone>(a: &Array2<T>, sy: usize, sx: usize) -> Array2<T> {
    let (ny, nx) = a.dim();
    Array2::from_shape_fn((ny, nx), |(y, x)| {
        a[[(y + ny - sy % ny) % ny, (x + nx - sx % nx) % nx]].clone()
    })
}

/// Moves the zero-frequency bin from index 0 to index `n/2`.
pub fn fftshift<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let (ny, nx) = a.dim();
    roll(a, ny / 2, nx / 2)
}

/// Inverse of [`fftshift`] (differs from it for odd lengths).
pub fn ifftshift<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let (ny, nx) = a.dim();
    roll(a, ny - ny / 2, nx - nx / 2)
}

fn centered_transform(field: &ComplexField, forward: bool) -> ComplexField {
    let (ny, nx) = field.grid().shape();
    let mut plan = Fft2::new(ny, nx);
    let mut data = ifftshift(field.data());
    plan.run(&mut data, forward);
    let scale = 1.0 / ((nx * ny) as f64).sqrt();
    data.mapv_inplace(|c| c * scale);
    ComplexField::from_parts_unchecked(*field.grid(), fftshift(&data), field.wavelength())
}

/// Unitary 2D DFT with the DC bin at `(ny/2, nx/2)`.
///
/// The returned field keeps the spatial grid metadata; its samples are
/// indexed by the centered frequencies of [`crate::field::GridSpec::freqs_x`].
pub fn fft2_centered(field: &ComplexField) -> ComplexField {
    centered_transform(field, true)
}

/// Inverse of [`fft2_centered`].
pub fn ifft2_centered(field: &ComplexField) -> ComplexField {
    centered_transform(field, false)
}
