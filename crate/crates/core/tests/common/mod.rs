#![allow(dead_code)]

pub mod gradcheck;

use std::f64::consts::{PI, TAU};

use holosim::{ComplexField, GridSpec, PhasePattern, TargetAmplitude};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LAMBDA: f64 = 520e-9;
pub const PITCH: f64 = 6.4e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(nx: usize, ny: usize) -> GridSpec {
    GridSpec::new(nx, ny, PITCH).unwrap()
}

pub fn random_complex(g: GridSpec, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
    Array2::from_shape_simple_fn(g.shape(), || {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_field(g: GridSpec, rng: &mut ChaCha8Rng) -> ComplexField {
    ComplexField::new(g, random_complex(g, rng), LAMBDA).unwrap()
}

pub fn random_phase(g: GridSpec, rng: &mut ChaCha8Rng) -> PhasePattern {
    PhasePattern::new(g, Array2::from_shape_simple_fn(g.shape(), || rng.random_range(0.0..TAU))).unwrap()
}

pub fn random_target(g: GridSpec, rng: &mut ChaCha8Rng) -> TargetAmplitude {
    TargetAmplitude::normalized(g, Array2::from_shape_simple_fn(g.shape(), || rng.random_range(0.0..1.0)))
        .unwrap()
}

pub fn inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

/// `max|a - b| / max|b|`.
pub fn rel_err(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max);
    diff / scale
}

/// Signed integer frequency of natural-order bin `k`, Nyquist negative.
pub fn signed(k: usize, n: usize) -> i64 {
    if k >= n - n / 2 {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// Direct double-sum DFT with the zero frequency at index `n/2` and
/// `1/sqrt(N)` normalization.
pub fn dft_centered_direct(x: &Array2<Complex64>, sign: f64) -> Array2<Complex64> {
    let (ny, nx) = x.dim();
    let (cy, cx) = ((ny / 2) as i64, (nx / 2) as i64);
    let norm = 1.0 / ((nx * ny) as f64).sqrt();
    Array2::from_shape_fn((ny, nx), |(v, u)| {
        let (fv, fu) = (v as i64 - cy, u as i64 - cx);
        let mut acc = Complex64::new(0.0, 0.0);
        for ((y, xx), val) in x.indexed_iter() {
            let (py, px) = (y as i64 - cy, xx as i64 - cx);
            let arg = sign * TAU * ((fu * px) as f64 / nx as f64 + (fv * py) as f64 / ny as f64);
            acc += val * Complex64::from_polar(1.0, arg);
        }
        acc * norm
    })
}

/// Transfer function evaluated directly from its definition.
pub fn transfer_at(fx: f64, fy: f64, lambda: f64, z: f64) -> Complex64 {
    let q = 1.0 - (lambda * fx).powi(2) - (lambda * fy).powi(2);
    if q > 0.0 {
        Complex64::from_polar(1.0, 2.0 * PI / lambda * q.sqrt() * z)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Angular-spectrum propagation as an explicit discrete sum: the field is
/// embedded in a `pad`-times larger zero frame, expanded on every sampled
/// plane wave, each wave advanced by its transfer factor, and the sum
/// evaluated back on the original pixels.
pub fn asm_direct(x: &Array2<Complex64>, pitch: f64, lambda: f64, z: f64, pad: usize) -> Array2<Complex64> {
    let (ny, nx) = x.dim();
    let (my, mx) = (ny * pad, nx * pad);
    let (oy, ox) = ((my - ny) / 2, (mx - nx) / 2);
    let mut spectrum = Array2::<Complex64>::zeros((my, mx));
    for ((v, u), s) in spectrum.indexed_iter_mut() {
        let (ku, kv) = (signed(u, mx) as f64, signed(v, my) as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for ((y, xx), val) in x.indexed_iter() {
            let (py, px) = ((y + oy) as f64, (xx + ox) as f64);
            acc += val * Complex64::from_polar(1.0, -TAU * (ku * px / mx as f64 + kv * py / my as f64));
        }
        let h = transfer_at(ku / (mx as f64 * pitch), kv / (my as f64 * pitch), lambda, z);
        *s = acc * h;
    }
    Array2::from_shape_fn((ny, nx), |(y, xx)| {
        let (py, px) = ((y + oy) as f64, (xx + ox) as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for ((v, u), s) in spectrum.indexed_iter() {
            let (ku, kv) = (signed(u, mx) as f64, signed(v, my) as f64);
            acc += s * Complex64::from_polar(1.0, TAU * (ku * px / mx as f64 + kv * py / my as f64));
        }
        acc / (mx * my) as f64
    })
}
