//! Closed-loop event machine: state-triggered pulses, stopping-time window,
//! learning trigger, refits, and the per-event log.
//!
//! One event cycle: the plant drifts under zero input until |x| crosses the
//! threshold or the stopping-time cap forces an event; the elapsed time since
//! the previous pulse end is recorded as tau; a pulse is planned from the
//! controller's model and applied open loop (events are masked while a pulse
//! is active and a new trigger never preempts one); tau then feeds the window.
//! When the learning trigger fires, the window is reset and the configured
//! data policy runs; a successful refit installs the new model together with a
//! freshly estimated expected stopping time and resets the window once more.
//! Model swaps happen between steps, so learning costs no simulation time.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pulse::plan_pulse;
use crate::scenario::{Activation, LearningPolicy, Scenario};
use crate::sde::{discretize, ContinuousModel, DiscreteModel, NoiseStream};
use crate::stopping::{estimate_expected_tau, sigma0, ExpectedTau, McConfig};
use crate::sysid::{least_squares_fit, to_continuous, Dataset, FitMode, Sample};
use crate::trigger::{learn_trigger, state_trigger, StoppingTimeWindow};
use crate::util::derive_seed;

const PLANT_SEED_TAG: u64 = 1;
const MC_SEED_TAG: u64 = 2;

/// One recorded event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    /// 1-based event counter.
    pub event_index: usize,
    /// Absolute time the event fired [s].
    pub t: f64,
    /// State at the trigger.
    pub x_trigger: f64,
    pub pulse_amp: f64,
    pub pulse_dur: f64,
    pub clipped: bool,
    /// Event was forced by the stopping-time cap, not a threshold crossing.
    pub forced: bool,
    /// Time since the previous pulse end, capped at tau_max [s].
    pub tau: f64,
    /// Mean over the (possibly still filling) window, including this tau.
    pub window_mean: f64,
    pub window_len: usize,
    /// Expected stopping time of the model active at this event [s].
    pub expected_tau: f64,
    pub gamma_learn: bool,
    /// Model the controller used for this event's pulse.
    pub model: ContinuousModel,
    /// Pulse planning or refit failure recorded for this event, if any.
    pub error: Option<String>,
}

/// A model swap performed by the learning path.
#[derive(Debug, Clone, PartialEq)]
pub struct InstallRecord {
    /// Event after which the new model became active.
    pub event_index: usize,
    pub t: f64,
    pub model: ContinuousModel,
    pub expected_tau: ExpectedTau,
    pub n_samples: usize,
}

/// Full trace of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub rows: Vec<EventRow>,
    pub kappa: f64,
    pub installs: Vec<InstallRecord>,
    /// Row indices at which the moving average restarts (trigger or install).
    pub window_resets: Vec<usize>,
    /// (events completed when the switch took effect, schedule entry index).
    pub truth_changes: Vec<(usize, usize)>,
}

impl EventLog {
    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tau).collect()
    }
}

/// Fresh-window refit in flight: keep operating, collect until the deadline.
struct PendingFit {
    deadline: f64,
    samples: Vec<Sample>,
}

struct Loop<'a> {
    s: &'a Scenario,
    truth_disc: DiscreteModel,
    noise: NoiseStream,
    x: f64,
    t: f64,
    n_cap: usize,
    all_samples: Vec<Sample>,
    pending: Option<PendingFit>,
    mc_calls: u64,
}

impl Loop<'_> {
    /// Advances one grid step and logs the transition for whichever data
    /// policy is currently collecting.
    fn grid_step(&mut self, u: f64) {
        let z = self.noise.next_normal();
        let x_next = self.truth_disc.step(self.x, u, z);
        let sample = Sample { x: self.x, u, x_next };
        match self.s.policy {
            LearningPolicy::AllData => self.all_samples.push(sample),
            LearningPolicy::FreshWindow { .. } => {
                if let Some(p) = &mut self.pending {
                    p.samples.push(sample);
                }
            }
        }
        self.x = x_next;
    }

    /// Monte Carlo estimate of E[tau] for `model`, with the restart spread
    /// taken from that model's own reset pulse. Each call draws a fresh seed.
    fn expected_tau_of(&mut self, model: &ContinuousModel) -> Result<ExpectedTau> {
        let sig0 = sigma0(model, self.s.state_trigger.delta, &self.s.limits)?;
        let seed = derive_seed(derive_seed(self.s.seed, MC_SEED_TAG), self.mc_calls);
        self.mc_calls += 1;
        let cfg = McConfig::new(self.s.mc_m, self.s.mc_dt, self.s.learn.tau_max, sig0, seed)?;
        estimate_expected_tau(model, self.s.state_trigger.delta, &cfg)
    }

    fn refit(&mut self, samples: Vec<Sample>) -> Result<(ContinuousModel, ExpectedTau, usize)> {
        let n = samples.len();
        let data = Dataset::new(samples, self.s.dt)?;
        let est = least_squares_fit(&data, FitMode::LoadDisturbance)?;
        let model = to_continuous(&est, self.s.dt)?;
        let expected = self.expected_tau_of(&model)?;
        Ok((model, expected, n))
    }
}

fn mark_reset(resets: &mut Vec<usize>, idx: usize) {
    if resets.last() != Some(&idx) {
        resets.push(idx);
    }
}

/// Runs one scenario to its horizon. Deterministic given the scenario seed.
///
/// Module failures inside the loop (an unplannable pulse, a rank-deficient
/// refit) are recorded on the event row and the run continues with the old
/// model; only configuration-level failures abort.
pub fn run_scenario(s: &Scenario) -> Result<EventLog> {
    s.validate()?;
    let n_cap = (s.learn.tau_max / s.dt).ceil() as usize;
    let mut lp = Loop {
        s,
        truth_disc: discretize(&s.truth, s.dt)?,
        noise: NoiseStream::new(derive_seed(s.seed, PLANT_SEED_TAG), 0),
        x: 0.0,
        t: 0.0,
        n_cap,
        all_samples: Vec::new(),
        pending: None,
        mc_calls: 0,
    };
    let mut truth = s.truth;
    let mut nominal = s.nominal;
    let mut expected = lp.expected_tau_of(&nominal)?;
    let mut window = StoppingTimeWindow::new(s.learn.n_window, s.learn.tau_max)?;

    let mut log = EventLog {
        rows: Vec::with_capacity(s.horizon_events),
        kappa: s.learn.kappa,
        installs: Vec::new(),
        window_resets: Vec::new(),
        truth_changes: Vec::new(),
    };
    let mut next_sched = 0;

    for event_index in 1..=s.horizon_events {
        while next_sched < s.schedule.len() {
            let entry = &s.schedule[next_sched];
            let due = match entry.at {
                Activation::AtEvent(e) => log.rows.len() >= e,
                Activation::AtTime(tt) => lp.t >= tt,
            };
            if !due {
                break;
            }
            truth = entry.model;
            lp.truth_disc = discretize(&truth, s.dt)?;
            log.truth_changes.push((log.rows.len(), next_sched));
            next_sched += 1;
        }

        // wait phase: zero input until a crossing or the cap forces an event
        let anchor = lp.t;
        let mut tau = 0.0;
        let mut forced = false;
        for k in 1..=lp.n_cap {
            lp.grid_step(0.0);
            lp.t = anchor + k as f64 * s.dt;
            if state_trigger(lp.x, &s.state_trigger) {
                tau = (k as f64 * s.dt).min(s.learn.tau_max);
                break;
            }
            if k == lp.n_cap {
                tau = s.learn.tau_max;
                forced = true;
            }
        }
        let x_trigger = lp.x;
        let t_event = lp.t;

        // pulse phase, planned from the controller's current model
        let mut error = None;
        let (amp, dur, clipped) = match plan_pulse(&nominal, x_trigger, &s.limits) {
            Ok(cmd) => (cmd.amplitude, cmd.duration, cmd.clipped),
            Err(e) => {
                error = Some(e.to_string());
                (0.0, 0.0, false)
            }
        };
        let n_full = (dur / s.dt).floor() as usize;
        for j in 1..=n_full {
            lp.grid_step(amp);
            lp.t = t_event + j as f64 * s.dt;
        }
        let frac = dur - n_full as f64 * s.dt;
        if frac > 0.0 {
            // exact sub-step to the pulse end; excluded from the fit data,
            // which assumes one shared sampling interval
            let sub = discretize(&truth, frac)?;
            let z = lp.noise.next_normal();
            lp.x = sub.step(lp.x, amp, z);
            lp.t = t_event + dur;
        }

        window.record_stop(tau);
        let fired = lp.pending.is_none()
            && window.is_full()
            && learn_trigger(&window, &expected, &s.learn)?;

        log.rows.push(EventRow {
            event_index,
            t: t_event,
            x_trigger,
            pulse_amp: amp,
            pulse_dur: dur,
            clipped,
            forced,
            tau,
            window_mean: window.mean().expect("window holds the tau just recorded"),
            window_len: window.len(),
            expected_tau: expected.mean,
            gamma_learn: fired,
            model: nominal,
            error,
        });

        if fired {
            window.reset();
            mark_reset(&mut log.window_resets, log.rows.len());
            match s.policy {
                LearningPolicy::AllData => {
                    let snapshot = lp.all_samples.clone();
                    match lp.refit(snapshot) {
                        Ok((model, exp, n_samples)) => {
                            nominal = model;
                            expected = exp;
                            log.installs.push(InstallRecord {
                                event_index,
                                t: lp.t,
                                model,
                                expected_tau: exp,
                                n_samples,
                            });
                            window.reset();
                            mark_reset(&mut log.window_resets, log.rows.len());
                        }
                        Err(e) => {
                            log::warn!("refit failed at event {event_index}: {e}");
                            let row = log.rows.last_mut().expect("row just pushed");
                            row.error = Some(format!("refit: {e}"));
                        }
                    }
                }
                LearningPolicy::FreshWindow { window_s } => {
                    lp.pending =
                        Some(PendingFit { deadline: lp.t + window_s, samples: Vec::new() });
                }
            }
        } else if lp.pending.as_ref().is_some_and(|p| lp.t >= p.deadline) {
            let samples = lp.pending.take().expect("pending checked above").samples;
            match lp.refit(samples) {
                Ok((model, exp, n_samples)) => {
                    nominal = model;
                    expected = exp;
                    log.installs.push(InstallRecord {
                        event_index,
                        t: lp.t,
                        model,
                        expected_tau: exp,
                        n_samples,
                    });
                    window.reset();
                    mark_reset(&mut log.window_resets, log.rows.len());
                }
                Err(e) => {
                    log::warn!("refit failed at event {event_index}: {e}");
                    let row = log.rows.last_mut().expect("row just pushed");
                    row.error = Some(format!("refit: {e}"));
                }
            }
        }

        if s.horizon_s.is_some_and(|h| lp.t >= h) {
            break;
        }
    }
    Ok(log)
}

/// Trailing mean over up to the last `window` values. `resets` lists indices
/// at which the average restarts (history before them is discarded).
pub fn moving_average(taus: &[f64], window: usize, resets: &[usize]) -> Vec<f64> {
    assert!(window >= 1, "moving average window must be at least 1");
    let mut out = Vec::with_capacity(taus.len());
    let mut buf = std::collections::VecDeque::with_capacity(window);
    let mut sum = 0.0;
    let mut next_reset = 0;
    for (i, &tau) in taus.iter().enumerate() {
        if next_reset < resets.len() && resets[next_reset] == i {
            buf.clear();
            sum = 0.0;
            next_reset += 1;
        }
        if buf.len() == window {
            sum -= buf.pop_front().expect("buffer is full");
        }
        buf.push_back(tau);
        sum += tau;
        out.push(sum / buf.len() as f64);
    }
    out
}

fn fmt_e(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes the log as CSV, one row per event, floats with 9 significant
/// digits. Re-exporting the same log is byte-identical.
pub fn export_csv(log: &EventLog, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = |line: String| w.write_all(line.as_bytes()).map_err(io_err);
    emit("event_index,t_s,x_trigger,pulse_amp,pulse_dur_s,tau_s,window_mean_s,\
          expected_tau_s,kappa_s,gamma_learn,model_a,model_b,model_eps,model_q\n"
        .to_string())?;
    for r in &log.rows {
        emit(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.event_index,
            fmt_e(r.t),
            fmt_e(r.x_trigger),
            fmt_e(r.pulse_amp),
            fmt_e(r.pulse_dur),
            fmt_e(r.tau),
            fmt_e(r.window_mean),
            fmt_e(r.expected_tau),
            fmt_e(log.kappa),
            u8::from(r.gamma_learn),
            fmt_e(r.model.a),
            fmt_e(r.model.b),
            fmt_e(r.model.eps_eff),
            fmt_e(r.model.q),
        ))?;
    }
    w.flush().map_err(io_err)
}
