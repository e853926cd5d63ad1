//! Minimum-time pulse planning for the saturated scalar plant.
//!
//! A pulse holds `u = +u_max` or `u = -u_max` until the noiseless state
//! reaches zero. With `g = b u + eps_eff`, solving
//! `e^{a t} x0 + g (e^{a t} - 1)/a = 0` for the hold time gives
//!
//! ```text
//! t = (1/a) ln( g / (a x0 + g) )         (t = -x0/g for a = 0)
//! ```
//!
//! which is admissible only when the log argument is positive and the
//! resulting time is non-negative. Both saturation signs are tried and the
//! faster admissible pulse wins.

use crate::error::{Error, Result};
use crate::sde::ContinuousModel;

/// Actuator saturation and the longest pulse the planner may emit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLimits {
    pub u_max: f64,
    /// Commands longer than this are clipped (default 1 s).
    pub max_duration: f64,
}

impl ActuatorLimits {
    pub fn new(u_max: f64) -> Result<Self> {
        if !(u_max > 0.0) || !u_max.is_finite() {
            return Err(Error::InvalidConfig(format!("u_max must be positive, got {u_max}")));
        }
        Ok(Self { u_max, max_duration: 1.0 })
    }

    pub fn with_max_duration(mut self, max_duration: f64) -> Result<Self> {
        if !(max_duration > 0.0) || !max_duration.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "max_duration must be positive, got {max_duration}"
            )));
        }
        self.max_duration = max_duration;
        Ok(self)
    }
}

/// A saturated input held for a fixed duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseCommand {
    /// Either +-u_max, or 0 for the degenerate zero-length command.
    pub amplitude: f64,
    pub duration: f64,
    /// True when the admissible duration exceeded the cap and was clipped.
    pub clipped: bool,
}

/// Hold time that drives the noiseless state from `x0` to zero under the
/// constant input `u_signed`, or `None` when that sign cannot reach zero.
pub fn pulse_length(model: &ContinuousModel, x0: f64, u_signed: f64) -> Option<f64> {
    let g = model.b * u_signed + model.eps_eff;
    let t = if model.a == 0.0 {
        if g == 0.0 {
            return None;
        }
        -x0 / g
    } else {
        let denom = model.a * x0 + g;
        if denom == 0.0 {
            return None;
        }
        let r = g / denom;
        if !(r > 0.0) {
            return None;
        }
        r.ln() / model.a
    };
    (t.is_finite() && t >= 0.0).then_some(t)
}

/// Plans the fastest admissible saturated pulse that resets `x0` to zero.
///
/// Durations beyond `limits.max_duration` are clipped and flagged. Returns an
/// error when neither sign is admissible.
pub fn plan_pulse(model: &ContinuousModel, x0: f64, limits: &ActuatorLimits) -> Result<PulseCommand> {
    if x0 == 0.0 {
        return Ok(PulseCommand { amplitude: 0.0, duration: 0.0, clipped: false });
    }
    let mut best: Option<(f64, f64)> = None;
    for amp in [limits.u_max, -limits.u_max] {
        if let Some(t) = pulse_length(model, x0, amp) {
            if best.map_or(true, |(_, tb)| t < tb) {
                best = Some((amp, t));
            }
        }
    }
    let (amplitude, duration) = best.ok_or(Error::InsufficientAuthority { x0 })?;
    if duration > limits.max_duration {
        log::warn!(
            "pulse from x0 = {x0} needs {duration:.6} s, clipping to {:.6} s",
            limits.max_duration
        );
        return Ok(PulseCommand { amplitude, duration: limits.max_duration, clipped: true });
    }
    Ok(PulseCommand { amplitude, duration, clipped: false })
}

/// Idealized instantaneous reset; the limit of a pulse as u_max grows.
pub fn dirac_reset(_x: f64) -> f64 {
    0.0
}
