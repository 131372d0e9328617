//! Reduced dynamics of a two-level system coupled to a finite environment
//! made of two energy bands with random Gaussian couplings.
//!
//! The crate computes the exact reduced dynamics by propagating pure states
//! of the composite system and compares it against a family of approximate
//! master equations:
//!
//! * standard second- and fourth-order time-convolutionless (TCL) equations,
//!   built on a factorizing projection;
//! * Hilbert-space-average (HAM) rate equations;
//! * second- and fourth-order TCL equations built on the band-correlated
//!   projection `P rho = sum_a tr_E{Pi_a rho} (x) Pi_a / N_a`, with and
//!   without the memory kernel.
//!
//! Modules map onto the layers of the computation:
//!
//! * [`model`] builds the random two-band model and initial states;
//! * [`propagator`] evolves pure states and extracts reduced observables;
//! * [`projections`] holds dense projection superoperators used as oracles;
//! * [`correlations`] provides kernels, rates and empirical correlators;
//! * [`master`] implements every approximate solver;
//! * [`harness`] runs configured experiments and serializes results.

pub mod correlations;
pub mod error;
pub mod harness;
pub mod master;
pub mod model;
pub mod ode;
pub mod parallel;
pub mod projections;
pub mod propagator;
pub mod state;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
