//! Simulation and optimization toolkit for dual-SLM ("Michelson") holographic
//! displays.
//!
//! The crate models two phase-only SLMs whose diffracted and undiffracted light
//! interfere at a target plane, and compares hologram solvers on it:
//!
//! - [`propagation`]: angular spectrum propagation and its exact adjoint.
//! - [`hardware`]: the emulated display (diffraction efficiency, quantization,
//!   misalignment, camera) behind the [`hardware::CaptureBackend`] trait.
//! - [`cgh`]: double phase-amplitude coding, model-based SGD and
//!   camera-in-the-loop SGD.
//! - [`metrics`] and [`calibration`]: PSNR, grating contrast and inter-SLM
//!   shift estimation.
//! - [`experiment`]: the configuration-driven sweeps behind the `holosim` CLI.

pub mod calibration;
pub mod cgh;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod hardware;
pub mod imageio;
pub mod metrics;
pub mod propagation;
pub mod targets;

pub use error::{HoloError, Result};
pub use field::{ComplexField, GridSpec, PhasePattern, TargetAmplitude};
pub use propagation::{PropagationSpec, Propagator};
