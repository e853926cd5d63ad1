//! Scenario configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys:
//!
//! ```text
//! seed                      u64, base seed (default 0, CLI may override)
//! truth.a / .b / .eps / .q  initial true plant (eps is the raw load)
//! truth.entry_mode          additive | input_side
//! nominal.a / .b / .eps / .q  initial controller model (same entry mode)
//! actuator.u_max            saturation level
//! trigger.delta             communication threshold
//! learn.eta / .N / .M / .tau_max   learning trigger parameters
//! mc.M / mc.dt              Monte Carlo runs and step (default learn.M, sim.dt)
//! sim.dt                    plant step (default 1e-3)
//! sim.horizon_events        stop after this many events
//! sim.horizon_s             optional additional time limit
//! learning.policy           fresh_window | all_data
//! learning.window_s         data window for fresh_window (required there)
//! schedule.K.at_event|at_time + .a/.b/.eps/.q   true dynamics switches
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pulse::ActuatorLimits;
use crate::sde::{ContinuousModel, DisturbanceEntry};
use crate::trigger::{LearnTriggerConfig, StateTriggerConfig};

/// When a scheduled change of the true dynamics becomes active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// After this many recorded events.
    AtEvent(usize),
    /// At this simulation time.
    AtTime(f64),
}

/// One entry of the true dynamics schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub at: Activation,
    pub model: ContinuousModel,
}

/// How the closed loop gathers data for a refit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningPolicy {
    /// Keep operating for `window_s` seconds after the trigger and fit on
    /// exactly that window.
    FreshWindow { window_s: f64 },
    /// Fit immediately on every sample collected since the start.
    AllData,
}

/// Full description of one closed-loop experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Initial truth followed by scheduled switches (activation strictly
    /// increasing).
    pub truth: ContinuousModel,
    pub schedule: Vec<ScheduleEntry>,
    pub nominal: ContinuousModel,
    pub entry_mode: DisturbanceEntry,
    pub limits: ActuatorLimits,
    pub state_trigger: StateTriggerConfig,
    pub learn: LearnTriggerConfig,
    pub mc_m: usize,
    pub mc_dt: f64,
    pub policy: LearningPolicy,
    pub dt: f64,
    pub horizon_events: usize,
    pub horizon_s: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("sim.dt must be positive, got {}", self.dt)));
        }
        if self.horizon_events == 0 {
            return Err(Error::InvalidConfig("sim.horizon_events must be at least 1".into()));
        }
        if let Some(h) = self.horizon_s {
            if !(h > 0.0) {
                return Err(Error::InvalidConfig(format!("sim.horizon_s must be positive, got {h}")));
            }
        }
        if self.mc_m == 0 {
            return Err(Error::InvalidConfig("mc.M must be at least 1".into()));
        }
        if !(self.mc_dt > 0.0) {
            return Err(Error::InvalidConfig(format!("mc.dt must be positive, got {}", self.mc_dt)));
        }
        if let LearningPolicy::FreshWindow { window_s } = self.policy {
            if !(window_s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "learning.window_s must be positive, got {window_s}"
                )));
            }
        }
        let mut last: Option<&Activation> = None;
        for entry in &self.schedule {
            match entry.at {
                Activation::AtEvent(e) if e == 0 => {
                    return Err(Error::InvalidConfig("schedule activation must be after event 0".into()))
                }
                Activation::AtTime(t) if !(t > 0.0) => {
                    return Err(Error::InvalidConfig("schedule activation time must be positive".into()))
                }
                _ => {}
            }
            if let Some(prev) = last {
                let increasing = match (prev, &entry.at) {
                    (Activation::AtEvent(a), Activation::AtEvent(b)) => a < b,
                    (Activation::AtTime(a), Activation::AtTime(b)) => a < b,
                    // mixed kinds cannot be ordered statically; reject
                    _ => false,
                };
                if !increasing {
                    return Err(Error::InvalidConfig(
                        "schedule activations must be strictly increasing and of one kind".into(),
                    ));
                }
            }
            last = Some(&entry.at);
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Scenario> {
        let mut kv: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ScenarioParse {
                line: line_no,
                reason: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(Error::ScenarioParse { line: line_no, reason: format!("empty value for `{key}`") });
            }
            if kv.insert(key.clone(), (value, line_no)).is_some() {
                return Err(Error::ScenarioParse { line: line_no, reason: format!("duplicate key `{key}`") });
            }
        }
        let mut p = Parser { kv };

        let entry_mode = match p.take("truth.entry_mode")?.as_deref() {
            Some("additive") => DisturbanceEntry::Additive,
            Some("input_side") | None => DisturbanceEntry::InputSide,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "truth.entry_mode must be additive or input_side, got `{other}`"
                )))
            }
        };

        let truth = p.model("truth", entry_mode)?;
        let nominal = p.model("nominal", entry_mode)?;

        let u_max = p.req_f64("actuator.u_max")?;
        let delta = p.req_f64("trigger.delta")?;
        let eta = p.req_f64("learn.eta")?;
        let n_window = p.req_usize("learn.N")?;
        let m_sim = p.req_usize("learn.M")?;
        let tau_max = p.req_f64("learn.tau_max")?;
        let learn = LearnTriggerConfig::new(eta, n_window, m_sim, tau_max)?;

        let dt = p.opt_f64("sim.dt")?.unwrap_or(1e-3);
        let mc_m = p.opt_usize("mc.M")?.unwrap_or(m_sim);
        let mc_dt = p.opt_f64("mc.dt")?.unwrap_or(dt);
        let horizon_events = p.req_usize("sim.horizon_events")?;
        let horizon_s = p.opt_f64("sim.horizon_s")?;
        let seed = p.opt_u64("seed")?.unwrap_or(0);

        let policy = match p.take("learning.policy")?.as_deref() {
            Some("all_data") => {
                if p.opt_f64("learning.window_s")?.is_some() {
                    return Err(Error::InvalidConfig(
                        "learning.window_s is only meaningful with policy fresh_window".into(),
                    ));
                }
                LearningPolicy::AllData
            }
            Some("fresh_window") | None => {
                let window_s = p.opt_f64("learning.window_s")?.unwrap_or(200.0);
                LearningPolicy::FreshWindow { window_s }
            }
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "learning.policy must be fresh_window or all_data, got `{other}`"
                )))
            }
        };

        let schedule = p.schedule(entry_mode)?;

        if let Some((key, (_, line))) = p.kv.iter().next() {
            return Err(Error::ScenarioParse { line: *line, reason: format!("unknown key `{key}`") });
        }

        let scenario = Scenario {
            truth,
            schedule,
            nominal,
            entry_mode,
            limits: ActuatorLimits::new(u_max)?.with_max_duration(tau_max)?,
            state_trigger: StateTriggerConfig::new(delta)?,
            learn,
            mc_m,
            mc_dt,
            policy,
            dt,
            horizon_events,
            horizon_s,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::AtEvent(e) => write!(f, "event {e}"),
            Activation::AtTime(t) => write!(f, "t = {t} s"),
        }
    }
}

struct Parser {
    kv: BTreeMap<String, (String, usize)>,
}

impl Parser {
    fn take(&mut self, key: &str) -> Result<Option<String>> {
        Ok(self.kv.remove(key).map(|(v, _)| v))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, kind: &str) -> Result<Option<T>> {
        match self.kv.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| Error::ScenarioParse {
                line,
                reason: format!("`{key}` must be {kind}, got `{v}`"),
            }),
        }
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.parse::<f64>(key, "a number")?
            .ok_or_else(|| Error::InvalidConfig(format!("missing required key `{key}`")))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse::<f64>(key, "a number")
    }

    fn req_usize(&mut self, key: &str) -> Result<usize> {
        self.parse::<usize>(key, "a non-negative integer")?
            .ok_or_else(|| Error::InvalidConfig(format!("missing required key `{key}`")))
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parse::<usize>(key, "a non-negative integer")
    }

    fn opt_u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.parse::<u64>(key, "a non-negative integer")
    }

    fn model(&mut self, prefix: &str, entry: DisturbanceEntry) -> Result<ContinuousModel> {
        let a = self.req_f64(&format!("{prefix}.a"))?;
        let b = self.req_f64(&format!("{prefix}.b"))?;
        let eps = self.req_f64(&format!("{prefix}.eps"))?;
        let q = self.req_f64(&format!("{prefix}.q"))?;
        ContinuousModel::with_load(a, b, eps, entry, q)
    }

    fn schedule(&mut self, entry: DisturbanceEntry) -> Result<Vec<ScheduleEntry>> {
        let mut ids: Vec<usize> = self
            .kv
            .keys()
            .filter_map(|k| k.strip_prefix("schedule."))
            .filter_map(|rest| rest.split('.').next())
            .filter_map(|id| id.parse::<usize>().ok())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let mut entries = Vec::with_capacity(ids.len());
        for id in ids {
            let model = self.model(&format!("schedule.{id}"), entry)?;
            let at_event = self.opt_usize(&format!("schedule.{id}.at_event"))?;
            let at_time = self.opt_f64(&format!("schedule.{id}.at_time"))?;
            let at = match (at_event, at_time) {
                (Some(e), None) => Activation::AtEvent(e),
                (None, Some(t)) => Activation::AtTime(t),
                (None, None) => {
                    return Err(Error::InvalidConfig(format!(
                        "schedule.{id} needs at_event or at_time"
                    )))
                }
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidConfig(format!(
                        "schedule.{id} may set only one of at_event, at_time"
                    )))
                }
            };
            entries.push(ScheduleEntry { at, model });
        }
        Ok(entries)
    }
}
