//! State trigger for communication and the learning trigger on stopping times.
//!
//! Communication is requested when |x| reaches the threshold delta. Learning
//! is requested when the mean of the last `n_window` observed stopping times
//! deviates from the model-implied expectation by at least `kappa`, where
//!
//! ```text
//! kappa = tau_max * sqrt( -(2/N) ln(eta/4) )
//! ```
//!
//! bounds the false trigger probability by `eta` for stopping times capped at
//! `tau_max`, provided the expectation itself comes from sufficiently many
//! (`m_sim > n_window`) simulations.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::stopping::ExpectedTau;

/// Communication trigger threshold, delta > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTriggerConfig {
    pub delta: f64,
}

impl StateTriggerConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }
}

/// True when the state has reached the communication threshold (boundary
/// included).
pub fn state_trigger(x: f64, cfg: &StateTriggerConfig) -> bool {
    x.abs() >= cfg.delta
}

/// Learning trigger threshold `kappa = tau_max * sqrt(-(2/n) ln(eta/4))`.
pub fn kappa(eta: f64, n_window: usize, tau_max: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidConfig(format!("eta must lie in (0, 1), got {eta}")));
    }
    if n_window == 0 {
        return Err(Error::InvalidConfig("n_window must be at least 1".into()));
    }
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(Error::InvalidConfig(format!("tau_max must be positive, got {tau_max}")));
    }
    Ok(tau_max * (-(2.0 / n_window as f64) * (eta / 4.0).ln()).sqrt())
}

/// Learning trigger parameters; `kappa` is derived from the other fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnTriggerConfig {
    pub eta: f64,
    pub n_window: usize,
    /// Monte Carlo sample count backing the expectation; must exceed n_window.
    pub m_sim: usize,
    pub tau_max: f64,
    pub kappa: f64,
}

impl LearnTriggerConfig {
    pub fn new(eta: f64, n_window: usize, m_sim: usize, tau_max: f64) -> Result<Self> {
        let kappa = kappa(eta, n_window, tau_max)?;
        if m_sim <= n_window {
            return Err(Error::InvalidConfig(format!(
                "m_sim = {m_sim} must exceed n_window = {n_window}"
            )));
        }
        Ok(Self { eta, n_window, m_sim, tau_max, kappa })
    }
}

/// Ring buffer over the most recent stopping times.
///
/// Recorded values are clamped to `tau_max`. The buffer reports full only
/// once `n_window` samples have arrived since the last reset, so a freshly
/// reset window cannot trigger on stale data.
#[derive(Debug, Clone)]
pub struct StoppingTimeWindow {
    buf: VecDeque<f64>,
    capacity: usize,
    tau_max: f64,
}

impl StoppingTimeWindow {
    pub fn new(capacity: usize, tau_max: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("window capacity must be at least 1".into()));
        }
        if !(tau_max > 0.0) || !tau_max.is_finite() {
            return Err(Error::InvalidConfig(format!("tau_max must be positive, got {tau_max}")));
        }
        Ok(Self { buf: VecDeque::with_capacity(capacity), capacity, tau_max })
    }

    /// Records a stopping time, evicting the oldest sample when full.
    pub fn record_stop(&mut self, tau: f64) {
        let tau = tau.min(self.tau_max);
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(tau);
    }

    /// Clears all samples; the window must refill before triggering again.
    pub fn reset(&mut self) {
        self.buf.clear();
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() >= self.capacity
    }

    /// Mean of the currently held samples, or `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.buf.is_empty() {
            return None;
        }
        Some(self.buf.iter().sum::<f64>() / self.buf.len() as f64)
    }
}

/// Evaluates the learning trigger on a full window: fires (returns true) when
/// |window mean - expected mean| >= kappa, boundary included.
pub fn learn_trigger(
    window: &StoppingTimeWindow,
    expected: &ExpectedTau,
    cfg: &LearnTriggerConfig,
) -> Result<bool> {
    if window.len() < cfg.n_window {
        return Err(Error::WindowNotFull { got: window.len(), need: cfg.n_window });
    }
    let mean = window.mean().expect("full window is non-empty");
    Ok((mean - expected.mean).abs() >= cfg.kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_trigger_boundary_included() {
        let cfg = StateTriggerConfig::new(0.02).unwrap();
        assert!(!state_trigger(0.0199, &cfg));
        assert!(state_trigger(0.02, &cfg));
        assert!(state_trigger(-0.02, &cfg));
        assert!(state_trigger(-5.0, &cfg));
    }

    #[test]
    fn kappa_known_values() {
        let k = kappa(0.05, 2000, 1.0).unwrap();
        assert!((k - 0.066_196_877_831_766_97).abs() < 1e-12);
        // eta = 4/e^2 makes ln(eta/4) = -2, so kappa = sqrt(2) at n = 2
        let k = kappa(4.0 / std::f64::consts::E.powi(2), 2, 1.0).unwrap();
        assert!((k - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn kappa_scales_with_tau_max() {
        let k1 = kappa(0.05, 2000, 1.0).unwrap();
        let k2 = kappa(0.05, 2000, 2.0).unwrap();
        assert!((k2 - 2.0 * k1).abs() < 1e-12);
    }

    #[test]
    fn kappa_domain_errors() {
        assert!(kappa(0.0, 100, 1.0).is_err());
        assert!(kappa(1.0, 100, 1.0).is_err());
        assert!(kappa(1.5, 100, 1.0).is_err());
        assert!(kappa(0.05, 0, 1.0).is_err());
        assert!(kappa(0.05, 100, 0.0).is_err());
    }

    #[test]
    fn config_requires_more_sims_than_window() {
        assert!(LearnTriggerConfig::new(0.05, 2000, 10000, 1.0).is_ok());
        assert!(LearnTriggerConfig::new(0.05, 2000, 2000, 1.0).is_err());
        assert!(LearnTriggerConfig::new(0.05, 2000, 100, 1.0).is_err());
    }

    #[test]
    fn window_evicts_and_caps() {
        let mut w = StoppingTimeWindow::new(3, 1.0).unwrap();
        for tau in [0.1, 0.2, 0.3, 0.4] {
            w.record_stop(tau);
        }
        assert_eq!(w.len(), 3);
        assert!((w.mean().unwrap() - 0.3).abs() < 1e-15);
        w.record_stop(7.0); // clamped to tau_max = 1.0
        assert!((w.mean().unwrap() - (0.3 + 0.4 + 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn window_reset_requires_refill() {
        let mut w = StoppingTimeWindow::new(2, 1.0).unwrap();
        w.record_stop(0.5);
        w.record_stop(0.5);
        assert!(w.is_full());
        w.reset();
        assert!(!w.is_full());
        assert_eq!(w.mean(), None);
    }

    #[test]
    fn trigger_window_guard() {
        // n = 100 keeps kappa (~0.296) below tau_max so samples are not clamped
        let cfg = LearnTriggerConfig::new(0.05, 100, 1000, 1.0).unwrap();
        let expected = ExpectedTau { mean: 0.5, stderr: 0.0, m_used: 1000 };
        let mut w = StoppingTimeWindow::new(100, 1.0).unwrap();
        w.record_stop(0.5);
        assert!(matches!(
            learn_trigger(&w, &expected, &cfg),
            Err(Error::WindowNotFull { got: 1, need: 100 })
        ));
        for _ in 0..99 {
            w.record_stop(0.5);
        }
        assert!(!learn_trigger(&w, &expected, &cfg).unwrap());
        // clearly past the band: fires
        w.reset();
        for _ in 0..100 {
            w.record_stop(0.5 + cfg.kappa + 1e-6);
        }
        assert!(learn_trigger(&w, &expected, &cfg).unwrap());
        // just inside the band: quiet
        w.reset();
        for _ in 0..100 {
            w.record_stop(0.5 + cfg.kappa - 1e-6);
        }
        assert!(!learn_trigger(&w, &expected, &cfg).unwrap());
    }

    #[test]
    fn trigger_boundary_equality_fires() {
        // dyadic values make |mean - expected| == kappa exact in floating point
        let cfg = LearnTriggerConfig { eta: 0.05, n_window: 1, m_sim: 2, tau_max: 1.0, kappa: 0.25 };
        let expected = ExpectedTau { mean: 0.5, stderr: 0.0, m_used: 2 };
        let mut w = StoppingTimeWindow::new(1, 1.0).unwrap();
        w.record_stop(0.75);
        assert!(learn_trigger(&w, &expected, &cfg).unwrap());
        w.reset();
        w.record_stop(0.25);
        assert!(learn_trigger(&w, &expected, &cfg).unwrap());
        w.reset();
        w.record_stop(0.5 + 0.2499);
        assert!(!learn_trigger(&w, &expected, &cfg).unwrap());
    }
}
