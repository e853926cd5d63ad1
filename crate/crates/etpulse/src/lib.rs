//! Event-triggered pulse control with event-triggered model learning for
//! scalar stochastic plants.
//!
//! A plant `dx = a x dt + b u dt + eps dt + q dW` is reset to zero by
//! saturated input pulses whenever |x| crosses a threshold. The times between
//! those resets (stopping times) are compared against a Monte Carlo estimate
//! of their expectation; when the windowed mean drifts past a
//! Hoeffding-derived threshold, the loop refits its model from logged data by
//! least squares and replans. [`harness::run_scenario`] composes the full
//! loop; the other modules are usable on their own.

pub mod error;
pub mod harness;
pub mod pulse;
pub mod replicate;
pub mod scenario;
pub mod sde;
pub mod stopping;
pub mod sysid;
pub mod trigger;
mod util;

pub use error::{Error, Result};
