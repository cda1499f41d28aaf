//! Simulation-and-analysis toolkit for the memory-reinforced random walk
//! whose steps are driven by a balanced four-colour urn.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the process state and the exact one-epoch transition.
//! * [`reinforcement`] describes the reinforcement function `F` and the
//!   derived success probability `g = p F + (1 - p)(1 - F)`.
//! * [`laws`] describes the sample-size laws `K_n`, their inverse moments and
//!   the finite-horizon series diagnostics.
//! * [`operators`] evaluates the smoothing operators (Bernstein-type
//!   trinomial and hypergeometric averages of `g`) and their error bounds.
//! * [`fixed_point`] and [`asymptotics`] compute the almost-sure limit and the
//!   regime-dependent limiting covariance in closed form.
//! * [`simulator`] and [`experiment`] run Monte Carlo ensembles and confront
//!   them with the closed forms.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fixed_point;
pub mod laws;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod reinforcement;
pub mod simulator;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ModelParams, SampleCounts, SampleMode, SamplingScheme, UrnState};
pub use reinforcement::{ReinforcementSpec, SimplexPoint, Smoothness};
pub use laws::SampleSizeLaw;
