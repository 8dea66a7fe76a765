//! Simulation of damped, boundary-driven sine-Gordon / Klein-Gordon
//! oscillator chains with an energy-consistent implicit finite-difference
//! scheme.
//!
//! The crate is organized around five concerns:
//!
//! - [`model`]: physical parameters, potentials and closed-form linear
//!   theory (dispersion, evanescent decay, continuum threshold amplitude,
//!   absorbing damping profile, stability inequality).
//! - [`stepper`]: time integration of the discretized chain by a nonlinear
//!   implicit scheme (Newton), a linearized implicit scheme (tridiagonal
//!   elimination) and a classical RK4 reference integrator.
//! - [`energy`]: the discrete total energy, boundary flux and dissipation
//!   terms, and the exact per-step energy-rate identity used as a runtime
//!   diagnostic and test oracle.
//! - [`experiments`]: amplitude sweeps, supratransmission-threshold
//!   bisection, bifurcation diagrams, energy surfaces, convergence studies
//!   and the validation battery; grids execute in parallel.
//! - [`cli`]: the command-line surface (config files, CSV/SVG output,
//!   run manifests).

pub mod cli;
pub mod energy;
pub mod experiments;
pub mod model;
pub mod stepper;

pub use model::{
    absorbing_profile, check_stability, dispersion, evanescent_decay, threshold_amplitude,
    ChainConfig, ConfigError, ConfigWarning, DomainError, DriveSpec, PotentialKind, SchemeKind,
    StabilityCheck,
};
pub use stepper::{run, ChainState, Recorders, RunOutput, SimulationError, StepError};
