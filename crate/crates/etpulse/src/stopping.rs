//! Monte Carlo estimation of the expected stopping time.
//!
//! A stopping time is the time from a reset until |x| first reaches the
//! trigger threshold. Runs start from x(0) ~ N(0, sigma0), step the
//! zero-input discretized plant, and stop at the first grid time where
//! |x| >= delta, capped at tau_max. Capped runs contribute tau_max to the
//! mean, matching how the closed loop records them.

use crate::error::{Error, Result};
use crate::pulse::{plan_pulse, ActuatorLimits};
use crate::sde::{discretize, ContinuousModel, NoiseStream};
use crate::util::expm1_over;

/// Monte Carlo configuration for stopping time estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Number of simulated runs.
    pub m_sim: usize,
    /// Step of the simulation grid; stopping times resolve to this grid.
    pub dt: f64,
    pub tau_max: f64,
    /// Variance of the restart distribution x(0) ~ N(0, sigma0).
    pub sigma0: f64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(m_sim: usize, dt: f64, tau_max: f64, sigma0: f64, seed: u64) -> Result<Self> {
        if m_sim == 0 {
            return Err(Error::InvalidConfig("m_sim must be at least 1".into()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("mc dt must be positive, got {dt}")));
        }
        if !(tau_max > 0.0) || !tau_max.is_finite() {
            return Err(Error::InvalidConfig(format!("tau_max must be positive, got {tau_max}")));
        }
        if !(sigma0 >= 0.0) || !sigma0.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma0 must be >= 0, got {sigma0}")));
        }
        Ok(Self { m_sim, dt, tau_max, sigma0, seed })
    }
}

/// Monte Carlo estimate of the expected stopping time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedTau {
    pub mean: f64,
    /// Standard error of the mean (0 when m_sim = 1).
    pub stderr: f64,
    pub m_used: usize,
}

/// Variance of the state accumulated by process noise over one nominal reset
/// pulse, used as the restart distribution of stopping time runs.
///
/// The pulse length is taken from `plan_pulse` at x0 = delta; the variance it
/// accrues is `q^2 (e^{2 a t} - 1)/(2 a)`.
pub fn sigma0(model: &ContinuousModel, delta: f64, limits: &ActuatorLimits) -> Result<f64> {
    let cmd = plan_pulse(model, delta, limits)?;
    Ok(model.q * model.q * cmd.duration * expm1_over(2.0 * model.a * cmd.duration))
}

/// Estimates the expected stopping time by simulating `m_sim` independent
/// zero-input runs. Deterministic for a fixed configuration: run i draws from
/// noise stream (seed, i), so the result does not depend on scheduling.
pub fn estimate_expected_tau(
    model: &ContinuousModel,
    delta: f64,
    cfg: &McConfig,
) -> Result<ExpectedTau> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let disc = discretize(model, cfg.dt)?;
    let n_cap = (cfg.tau_max / cfg.dt).ceil() as u64;
    let init_std = cfg.sigma0.sqrt();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for run in 0..cfg.m_sim {
        let mut stream = NoiseStream::new(cfg.seed, run as u64);
        let mut x = init_std * stream.next_normal();
        let mut tau = cfg.tau_max;
        for k in 1..=n_cap {
            x = disc.step(x, 0.0, stream.next_normal());
            if x.abs() >= delta {
                tau = (k as f64 * cfg.dt).min(cfg.tau_max);
                break;
            }
        }
        sum += tau;
        sum_sq += tau * tau;
    }
    let m = cfg.m_sim as f64;
    let mean = sum / m;
    let stderr = if cfg.m_sim > 1 {
        let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    Ok(ExpectedTau { mean, stderr, m_used: cfg.m_sim })
}
