//! Simulation and analysis toolkit for chained Bell experiments.
//!
//! The crate is organised bottom-up:
//!
//! * [`spacetime`] places the two measurement events in 1+1-dimensional
//!   spacetime and decides, in each beam-splitter's rest frame, which party
//!   selects its outcome first.
//! * [`chainedbell`] holds the interferometer phase arithmetic, the
//!   equipartitioned chained settings and the closed-form `I(N, Θ)`.
//! * [`models`] defines the [`models::OutcomeModel`] contract and the
//!   quantum, frame-dependent, local and signaling samplers.
//! * [`montecarlo`] runs trials and turns counts into estimates.
//! * [`analysis`] applies the non-signaling distance bound `D ≤ 3I/2`.

pub mod analysis;
pub mod chainedbell;
pub mod error;
pub mod models;
pub mod montecarlo;
pub mod rng;
pub mod spacetime;

pub use error::{Error, Result};
