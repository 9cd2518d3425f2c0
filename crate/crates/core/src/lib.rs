//! Planar two-mode piecewise deterministic Markov processes: a linear PDMP
//! switched between two trace-zero matrices with imaginary spectra, and its
//! nonlinear parent, a pair of Lotka-Volterra vector fields sharing an
//! equilibrium.
//!
//! The linear process is simulated exactly (closed-form matrix exponentials
//! in log-polar coordinates, no time stepping), so Lyapunov-exponent
//! estimates carry no integration error. An independent quadrature route
//! solves the stationary angular transport system on the circle and
//! integrates the radial rate against it; the two estimates of the growth
//! rate must agree. The nonlinear process is integrated in log-density
//! coordinates with step sizes controlled by the drift of the per-regime
//! first integral.
//!
//! This crate is `no_std` (with `alloc`); all transcendental math goes
//! through `libm`, so results are reproducible across builds. IO, file
//! formats and the command line live in the companion `pdmp-cli` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod experiments;
pub mod linalg2;
pub mod lotka_volterra;
pub mod lyapunov;
pub mod ode;
pub mod rng;
mod stationary;
pub mod switched_linear;

pub use error::{QuadratureError, SimError};
pub use linalg2::{Mat2, TraceZeroMatrix2};
pub use lotka_volterra::{LVRegime, LVState, SwitchedLVSystem};
pub use lyapunov::{AngularDensityPair, GrowthRateEstimate};
pub use switched_linear::{LogPolarState, LogPolarTrajectory, SwitchedLinearSystem};
