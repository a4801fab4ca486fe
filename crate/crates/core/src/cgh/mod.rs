//! CGH solvers: double phase-amplitude coding, model-based SGD and
//! camera-in-the-loop SGD, for one or two SLMs.

pub mod dpac;
pub mod objective;
pub mod solver;

pub use dpac::{dpac_decompose, dpac_dual, dpac_single, TargetPhase};
pub use objective::{loss_and_gradient, CitlGradient, LossGradient, Objective, ScaleMode};
pub use solver::{
    citl_solve, citl_solve_with, initial_phases, sgd_solve, sgd_solve_observed, InitMode,
    IterationView, LossKind, RunRecord, SolverConfig,
};
