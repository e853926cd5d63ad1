//! Canned benchmark suites: three reference studies with known before/after
//! communication behavior, used by the CLI and the acceptance tests.
//!
//! Study 1 is a single stable process with a correct initial model and two
//! scheduled dynamics changes, refit from a fresh 200 s data window. Studies
//! 2 and 3 start from wrong initial models (stable batch and unstable batch)
//! with randomly drawn true parameters, refit from all data collected so far.
//! Randomly drawn parameters come from the run seed, so a report is
//! reproducible end to end.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::{run_scenario, EventLog};
use crate::pulse::ActuatorLimits;
use crate::scenario::{Activation, LearningPolicy, Scenario, ScheduleEntry};
use crate::sde::{ContinuousModel, DisturbanceEntry};
use crate::trigger::{LearnTriggerConfig, StateTriggerConfig};
use crate::util::derive_seed;

const DELTA: f64 = 0.02;
const ETA: f64 = 0.05;
const N_WINDOW: usize = 2000;
const M_SIM: usize = 10000;
const TAU_MAX: f64 = 1.0;
const DT: f64 = 1e-3;

/// Outcome for one system of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutcome {
    pub label: String,
    pub truth: ContinuousModel,
    /// Mean stopping time before the first model swap [s].
    pub before: f64,
    /// Mean stopping time after the last model swap [s]; None when learning
    /// never triggered.
    pub after: Option<f64>,
    /// Event at which the first new model was installed.
    pub install_event: Option<usize>,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateReport {
    pub example: u8,
    pub seed: u64,
    pub systems: Vec<SystemOutcome>,
}

impl ReplicateReport {
    /// True when every system improved: learning triggered and the
    /// post-learning mean strictly exceeds the pre-learning mean.
    pub fn all_improved(&self) -> bool {
        self.systems.iter().all(|s| s.after.is_some_and(|a| a > s.before))
    }
}

impl fmt::Display for ReplicateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "example {} (seed {})", self.example, self.seed)?;
        for s in &self.systems {
            write!(f, "  {:<28} before {:>8.1} ms", s.label, s.before * 1e3)?;
            match (s.after, s.install_event) {
                (Some(a), Some(e)) => {
                    writeln!(f, "  after {:>8.1} ms  (installed at event {e})", a * 1e3)
                }
                _ => writeln!(f, "  after        -     (learning never triggered)"),
            }?;
        }
        if self.systems.len() > 1 {
            let improved =
                self.systems.iter().filter(|s| s.after.is_some_and(|a| a > s.before)).count();
            writeln!(f, "  {improved}/{} improved", self.systems.len())?;
        }
        Ok(())
    }
}

fn summarize(label: String, scenario: &Scenario, log: &EventLog) -> SystemOutcome {
    let taus = log.taus();
    let mean = |slice: &[f64]| slice.iter().sum::<f64>() / slice.len() as f64;
    let (before, after, install_event) = match (log.installs.first(), log.installs.last()) {
        (Some(first), Some(last)) if last.event_index < taus.len() => (
            mean(&taus[..first.event_index]),
            Some(mean(&taus[last.event_index..])),
            Some(first.event_index),
        ),
        _ => (mean(&taus), None, None),
    };
    SystemOutcome {
        label,
        truth: scenario.truth,
        before,
        after,
        install_event,
        events: taus.len(),
    }
}

fn base(truth: ContinuousModel, nominal: ContinuousModel, u_max: f64, seed: u64) -> Scenario {
    Scenario {
        truth,
        schedule: vec![],
        nominal,
        entry_mode: DisturbanceEntry::InputSide,
        limits: ActuatorLimits::new(u_max)
            .expect("positive saturation")
            .with_max_duration(TAU_MAX)
            .expect("positive cap"),
        state_trigger: StateTriggerConfig::new(DELTA).expect("positive threshold"),
        learn: LearnTriggerConfig::new(ETA, N_WINDOW, M_SIM, TAU_MAX)
            .expect("valid trigger parameters"),
        mc_m: M_SIM,
        mc_dt: DT,
        policy: LearningPolicy::AllData,
        dt: DT,
        horizon_events: 3000,
        horizon_s: None,
        seed,
    }
}

fn input_side(a: f64, b: f64, load: f64, q: f64) -> ContinuousModel {
    ContinuousModel::with_load(a, b, load, DisturbanceEntry::InputSide, q)
        .expect("finite parameters")
}

/// Stable process with a correct initial model; the load doubles after 2000
/// events and both dynamics and load change again after 7000. Refits use a
/// fresh 200 s window.
pub fn example1_scenario(seed: u64) -> Scenario {
    let truth = input_side(-0.01, -0.01, 5.0, 1e-4);
    let mut s = base(truth, truth, 100.0, derive_seed(seed, 100));
    s.schedule = vec![
        ScheduleEntry {
            at: Activation::AtEvent(2000),
            model: input_side(-0.01, -0.01, 10.0, 1e-4),
        },
        ScheduleEntry {
            at: Activation::AtEvent(7000),
            model: input_side(-0.05, -0.05, 20.0, 1e-4),
        },
    ];
    s.policy = LearningPolicy::FreshWindow { window_s: 200.0 };
    s.horizon_events = 12000;
    s
}

/// Two stable benchmark batches of five systems each. True pole and gain per
/// row; load and noise level drawn uniformly from the published intervals.
pub fn example2_systems(seed: u64) -> Vec<(String, Scenario)> {
    let batches: [(f64, f64, f64, f64, f64, &[f64]); 2] = [
        // (nominal a=b, nominal load, u_max, load lo, load hi, true poles)
        (-0.1, 0.1, 1.0, 0.1, 0.2, &[-10.0, -4.0 / 3.0, -0.5, -0.25, -1.0 / 6.0]),
        (-1.0, 1.0, 100.0, 1.0, 5.0, &[-0.25, -0.05, -0.02, -0.01, -0.005]),
    ];
    let mut out = Vec::with_capacity(10);
    for (batch_idx, (a_nom, load_nom, u_max, lo, hi, poles)) in batches.into_iter().enumerate() {
        for (row, &a_true) in poles.iter().enumerate() {
            let sys = batch_idx * 5 + row;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 200 + sys as u64));
            let load = rng.gen_range(lo..=hi);
            let q = rng.gen_range(1e-4..=1e-3);
            let truth = input_side(a_true, a_true, load, q);
            let nominal = input_side(a_nom, a_nom, load_nom, 1e-4);
            let scenario = base(truth, nominal, u_max, derive_seed(seed, 300 + sys as u64));
            out.push((format!("sys{} a=b={a_true:.4}", batch_idx + 1), scenario));
        }
    }
    out
}

/// Ten unstable systems with true parameters drawn uniformly from the
/// published intervals, against one fixed (wrong) nominal model.
pub fn example3_systems(seed: u64) -> Vec<(String, Scenario)> {
    let nominal = input_side(5.0, 3.0, 0.01, 1e-4);
    (0..10)
        .map(|sys| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 400 + sys as u64));
            let a = rng.gen_range(1.0..=10.0);
            let b = rng.gen_range(1.0..=2.0);
            let load = rng.gen_range(0.01..=0.02);
            let q = rng.gen_range(1e-4..=1e-3);
            let truth = input_side(a, b, load, q);
            let scenario = base(truth, nominal, 1.0, derive_seed(seed, 500 + sys as u64));
            (format!("sys{} a={a:.3} b={b:.3}", sys + 1), scenario)
        })
        .collect()
}

/// Runs one of the three canned studies and reports per-system mean stopping
/// times before and after learning.
pub fn replicate_example(id: u8, seed: u64) -> Result<ReplicateReport> {
    let systems: Vec<(String, Scenario)> = match id {
        1 => vec![("a=b=-0.01 load=5".to_string(), example1_scenario(seed))],
        2 => example2_systems(seed),
        3 => example3_systems(seed),
        other => {
            return Err(Error::InvalidConfig(format!("example id must be 1, 2 or 3, got {other}")))
        }
    };
    let mut report = ReplicateReport { example: id, seed, systems: Vec::new() };
    for (label, scenario) in systems {
        let log = run_scenario(&scenario)?;
        report.systems.push(summarize(label, &scenario, &log));
    }
    Ok(report)
}
