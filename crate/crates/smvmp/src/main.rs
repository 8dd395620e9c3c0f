use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smvmp::experiment::RunConfig;
use smvmp::{report, CliError, Result};
use smvmp_core::{ScenarioShape, Strategy, WogaParams};

#[derive(Parser)]
#[command(name = "smvmp", version, about = "Multi-objective VM placement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place a static scenario with one strategy over repeated seeds.
    Static(Common),
    /// Replay arrivals, departures and utilization over epochs.
    Dynamic(Common),
    /// Run several strategies on identical scenarios.
    Compare(Common),
    /// Write a scenario (and optionally a synthetic trace) to disk.
    GenScenario(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Servers at 60% and users at 40% of the VM count.
    Static,
    /// Servers at 60% and users at 20% of the VM count.
    Dynamic,
}

#[derive(Args)]
struct Common {
    /// Strategy name; for `compare`, a comma-separated list (first is the reference).
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<String>,
    #[arg(long, default_value_t = 100)]
    vms: usize,
    #[arg(long)]
    servers: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    /// Ratio preset for servers and users when not given explicitly.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    repeat: usize,
    #[arg(long)]
    gmax: Option<usize>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    stall: Option<usize>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    /// Trace CSV for dynamic runs (epoch,vm_id,cpu_pct,mem_pct,event).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Synthetic trace length when no trace file is given.
    #[arg(long, default_value_t = 50)]
    epochs: u32,
    /// Scenario JSON used instead of generating one per seed.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Catalog JSON overriding the built-in server and VM types.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    low_watermark: f64,
    #[arg(long, default_value_t = 0.9)]
    high_watermark: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self, default_profile: Profile, default_strategies: &[Strategy]) -> Result<RunConfig> {
        let strategies = if self.strategy.is_empty() {
            default_strategies.to_vec()
        } else {
            self.strategy
                .iter()
                .map(|s| Strategy::from_name(s.trim()).ok_or_else(|| CliError::Config(format!("unknown strategy '{s}'"))))
                .collect::<Result<_>>()?
        };
        let preset = match self.profile.unwrap_or(default_profile) {
            Profile::Static => ScenarioShape::static_run(self.vms),
            Profile::Dynamic => ScenarioShape::dynamic_run(self.vms),
        };
        let defaults = WogaParams::default();
        Ok(RunConfig {
            strategies,
            shape: ScenarioShape {
                vms: self.vms,
                servers: self.servers.unwrap_or(preset.servers),
                users: self.users.unwrap_or(preset.users),
            },
            scenario: self.scenario.clone(),
            catalog: self.catalog.clone(),
            trace: self.trace.clone(),
            epochs: self.epochs,
            seed: self.seed,
            repeat: self.repeat,
            woga: WogaParams {
                population_size: self.pop.unwrap_or(defaults.population_size),
                max_iterations: self.gmax.unwrap_or(defaults.max_iterations),
                stall_limit: self.stall.unwrap_or(defaults.stall_limit),
                mutation_rate: self.mutation_rate.unwrap_or(defaults.mutation_rate),
                seed: self.seed,
            },
            low_watermark: self.low_watermark,
            high_watermark: self.high_watermark,
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Static(c) => {
            let cfg = c.config(Profile::Static, &[Strategy::Woga])?;
            if cfg.strategies.len() != 1 {
                return Err(CliError::Config("static takes a single strategy; use compare".into()));
            }
            let runs = smvmp::run_static(&cfg)?;
            for row in report::write_static(&c.out, "static", &cfg, &runs)? {
                println!(
                    "{}: ru {:.2}% (sd {:.2}), pw {:.1} W, phi {:.2}%, theta {:.2}% over {} runs",
                    row.strategy, row.ru_pct_mean, row.ru_pct_std, row.pw_w_mean, row.phi_pct_mean, row.theta_pct_mean, row.runs
                );
            }
        }
        Command::Compare(c) => {
            let cfg = c.config(Profile::Static, &Strategy::ALL)?;
            let runs = smvmp::run_static(&cfg)?;
            let summary = report::write_static(&c.out, "compare", &cfg, &runs)?;
            for row in report::compare_rows(&summary) {
                let pct = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.1}%"));
                println!(
                    "{:<10} ru {:.2}%  pw {:.1} W  phi {:.2}%  theta {:.2}%  | {} gains ru {}, cuts pw {}, phi {}, theta {}",
                    row.strategy, row.ru_pct_mean, row.pw_w_mean, row.phi_pct_mean, row.theta_pct_mean, row.reference,
                    pct(row.ru_gain_pct), pct(row.pw_reduction_pct), pct(row.phi_reduction_pct), pct(row.theta_reduction_pct)
                );
            }
        }
        Command::Dynamic(c) => {
            let cfg = c.config(Profile::Dynamic, &[Strategy::Woga])?;
            if cfg.strategies != [Strategy::Woga] {
                return Err(CliError::Config("dynamic runs use the woga strategy".into()));
            }
            let runs = smvmp::run_dynamic_all(&cfg)?;
            for row in report::write_dynamic(&c.out, &cfg, &runs)? {
                let f = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
                println!(
                    "seed {}: {} epochs, ru {}%, pw {} W, apms {}, migrations {} costing {:.3e}",
                    row.seed, row.epochs, f(row.ru_pct), f(row.pw_w), f(row.apms), row.mg_count, row.mg_cost
                );
            }
        }
        Command::GenScenario(c) => {
            let cfg = c.config(Profile::Static, &[Strategy::Woga])?;
            let (dc, trace) = smvmp::generate(&cfg)?;
            for p in report::write_generated(&c.out, &dc, trace.as_ref())? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
