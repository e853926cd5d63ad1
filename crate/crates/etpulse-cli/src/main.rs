use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use etpulse::harness::{export_csv, run_scenario};
use etpulse::pulse::ActuatorLimits;
use etpulse::replicate::replicate_example;
use etpulse::scenario::Scenario;
use etpulse::sde::{ContinuousModel, DisturbanceEntry};
use etpulse::stopping::{estimate_expected_tau, sigma0, McConfig};
use etpulse::trigger::kappa;

#[derive(Parser)]
#[command(name = "etpulse", version, about = "Event-triggered pulse control simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Entry {
    /// Disturbance adds directly to dx.
    Additive,
    /// Disturbance enters with the input and is scaled by b.
    InputSide,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and export the event log as CSV.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed given in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for events.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo estimate of the expected stopping time of a model.
    Mc {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        /// Raw load disturbance before the entry mode is applied.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        load: f64,
        #[arg(long, value_enum, default_value_t = Entry::InputSide)]
        entry: Entry,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0.02)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        u_max: f64,
        #[arg(long, default_value_t = 10000)]
        m: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one of the canned studies (1, 2 or 3) and print its report.
    Replicate {
        #[arg(long)]
        example: u8,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the learning trigger threshold for (eta, N, tau_max).
    Kappa {
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        tau_max: f64,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Run { scenario, seed, out } => {
            let mut s = Scenario::from_file(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let log = run_scenario(&s)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let csv = out.join("events.csv");
            export_csv(&log, &csv)?;
            println!(
                "{} events, {} installs, {} truth changes (seed {})",
                log.rows.len(),
                log.installs.len(),
                log.truth_changes.len(),
                s.seed
            );
            for inst in &log.installs {
                println!(
                    "  install at event {}: a={:.6} b={:.6} eps={:.6} q={:.6e}, E[tau]={:.4} s",
                    inst.event_index,
                    inst.model.a,
                    inst.model.b,
                    inst.model.eps_eff,
                    inst.model.q,
                    inst.expected_tau.mean
                );
            }
            println!("wrote {}", csv.display());
        }
        Cmd::Mc { a, b, load, entry, q, delta, u_max, m, dt, tau_max, seed } => {
            let entry = match entry {
                Entry::Additive => DisturbanceEntry::Additive,
                Entry::InputSide => DisturbanceEntry::InputSide,
            };
            let model = ContinuousModel::with_load(a, b, load, entry, q)?;
            let limits = ActuatorLimits::new(u_max)?.with_max_duration(tau_max)?;
            let sig0 = sigma0(&model, delta, &limits)?;
            let cfg = McConfig::new(m, dt, tau_max, sig0, seed)?;
            let est = estimate_expected_tau(&model, delta, &cfg)?;
            println!("E[tau] = {:.6} s (stderr {:.2e}, {} runs)", est.mean, est.stderr, est.m_used);
        }
        Cmd::Replicate { example, seed } => {
            let report = replicate_example(example, seed)?;
            print!("{report}");
        }
        Cmd::Kappa { eta, n, tau_max } => {
            println!("kappa = {:.9} s", kappa(eta, n, tau_max)?);
        }
    }
    Ok(())
}
