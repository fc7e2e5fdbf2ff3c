//! Reactive driving-style simulation.
//!
//! A parametric behavior model turns road curvature and oncoming traffic
//! into a target lateral offset; a GG-envelope constrained path follower
//! tracks it on a synthetic rural road. The [`metrics`] module recovers
//! the style parameters back from the resulting logs.

pub mod behavior;
pub mod error;
pub mod metrics;
pub mod pathfollow;
pub mod quantile;
pub mod road;
pub mod scenario;
pub mod styles;

pub use error::{Error, Result};
