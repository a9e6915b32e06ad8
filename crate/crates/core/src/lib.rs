//! Risk-aware control barrier functions for discrete-time linear systems
//! with partially observed state.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the system, safe-set and scenario descriptions.
//! * [`wc_cvar`] evaluates worst-case CVaR over mean/covariance ambiguity sets.
//! * [`kalman`] implements the prediction/update recursions.
//! * [`cbf`] turns a belief into solver-ready safety constraints.
//! * [`solve`] is a small dense convex solver for the resulting programs.
//! * [`control`] maps constraints into controller inputs.
//! * [`simulate`] runs closed-loop Monte Carlo experiments.

pub mod cbf;
pub mod control;
mod error;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod simulate;
pub mod solve;
pub mod wc_cvar;

pub use error::{Error, Result};
