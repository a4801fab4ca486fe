//! Central-difference checks of the analytic phase gradients.

use holosim::cgh::{CitlGradient, Objective, ScaleMode};
use holosim::hardware::{CaptureBackend, EmulatedCamera, EmulatedHardware, HardwareProfile};
use holosim::{PhasePattern, PropagationSpec, TargetAmplitude};
use ndarray::{Array2, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

pub const N: usize = 32;
pub const H: f64 = 1e-5;
pub const SAMPLES: usize = 20;

fn setup(seed: u64, pad: usize) -> (ChaCha8Rng, PropagationSpec, TargetAmplitude) {
    let mut r = rng(seed);
    let g = grid(N, N);
    let prop = PropagationSpec::new(LAMBDA, 0.02, g, pad).unwrap();
    let t = random_target(g, &mut r);
    (r, prop, t)
}

fn nudged(phi: &PhasePattern, y: usize, x: usize, d: f64) -> PhasePattern {
    let mut p = phi.phase().clone();
    p[[y, x]] += d;
    PhasePattern::new(*phi.grid(), p).unwrap()
}

/// Largest relative disagreement between `grad` and central differences of
/// `f` over `SAMPLES` random pixels of SLM `which`.
fn worst<F>(r: &mut ChaCha8Rng, phis: (&PhasePattern, Option<&PhasePattern>), grad: &Array2<f64>, which: usize, f: F) -> f64
where
    F: Fn(&PhasePattern, Option<&PhasePattern>) -> f64,
{
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    assert!(gmax > 0.0, "gradient vanished");
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let (y, x) = (r.random_range(0..N), r.random_range(0..N));
        let (plus, minus) = if which == 1 {
            (f(&nudged(phis.0, y, x, H), phis.1), f(&nudged(phis.0, y, x, -H), phis.1))
        } else {
            let p2 = phis.1.unwrap();
            (f(phis.0, Some(&nudged(p2, y, x, H))), f(phis.0, Some(&nudged(p2, y, x, -H))))
        };
        let fd = (plus - minus) / (2.0 * H);
        let g = grad[[y, x]];
        worst = worst.max((fd - g).abs() / g.abs().max(fd.abs()).max(1e-6 * gmax));
    }
    worst
}

/// Model-based loss, every SLM checked.
pub fn model_error(seed: u64, pad: usize, dual: bool, scale: ScaleMode) -> f64 {
    let (mut r, prop, t) = setup(seed, pad);
    let p1 = random_phase(prop.grid, &mut r);
    let p2 = dual.then(|| random_phase(prop.grid, &mut r));
    let mut obj = Objective::new(t.clone(), prop).unwrap().with_scale_mode(scale);
    let eval = obj.loss_and_gradient(&p1, p2.as_ref(), None).unwrap();
    assert_eq!(eval.grad2.is_some(), dual);
    let loss = |a: &PhasePattern, b: Option<&PhasePattern>| {
        let mut o = Objective::new(t.clone(), prop).unwrap().with_scale_mode(scale);
        o.loss_and_gradient(a, b, None).unwrap().loss
    };
    let mut e = worst(&mut r, (&p1, p2.as_ref()), &eval.grad1, 1, loss);
    if let Some(g2) = &eval.grad2 {
        e = e.max(worst(&mut r, (&p1, p2.as_ref()), g2, 2, loss));
    }
    e
}

fn imperfect_hardware(prop: PropagationSpec) -> EmulatedHardware {
    let mut hw = HardwareProfile::ideal(prop).unwrap();
    hw.slm1.eta = 0.75;
    hw.slm2.eta = 0.6;
    hw.slm2.lateral_shift = [0.4, -0.3];
    EmulatedHardware::new(hw).unwrap()
}

/// Camera-in-the-loop gradient against the loss with the measurement frozen:
/// `Re⟨w, û(φ)⟩` for the measured-phase cotangent `w`, or `Σ r·|û(φ)|` when
/// the cotangent follows the model phase.
pub fn citl_error(seed: u64, dual: bool, mode: CitlGradient, intensity_only: bool) -> f64 {
    let (mut r, prop, t) = setup(seed, 1);
    let p1 = random_phase(prop.grid, &mut r);
    let p2 = dual.then(|| random_phase(prop.grid, &mut r));
    let mut cam = EmulatedCamera::new(imperfect_hardware(prop));
    if intensity_only {
        cam = cam.intensity_only();
    }
    let capture = cam.capture(&p1, p2.as_ref()).unwrap();
    let mut obj = Objective::new(t.clone(), prop).unwrap();
    let eval = obj.loss_and_gradient_measured(&p1, p2.as_ref(), &capture, mode).unwrap();

    let n = (N * N) as f64;
    let s = eval.scale;
    let residual = Zip::from(&capture.amplitude)
        .and(t.amplitude())
        .map_collect(|&a, &at| 2.0 * s * (s * a - at) / n);
    let cotangent = match (&capture.field, mode) {
        (Some(field), CitlGradient::Physical) => Some(Zip::from(&residual).and(field).map_collect(|&r, &g| r * g / g.norm())),
        _ => None,
    };
    let surrogate = |a: &PhasePattern, b: Option<&PhasePattern>| {
        let mut o = Objective::new(t.clone(), prop).unwrap();
        let u = o.model_field(a, b).unwrap();
        match &cotangent {
            Some(w) => w.iter().zip(&u).map(|(w, u)| (w.conj() * u).re).sum(),
            None => residual.iter().zip(&u).map(|(r, u)| r * u.norm()).sum(),
        }
    };
    let mut e = worst(&mut r, (&p1, p2.as_ref()), &eval.grad1, 1, surrogate);
    if let Some(g2) = &eval.grad2 {
        e = e.max(worst(&mut r, (&p1, p2.as_ref()), g2, 2, surrogate));
    }
    e
}
