//! CSV and manifest output. Wall-clock times go only to `timing.csv` so the
//! other files are identical across reruns of the same config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smvmp_core::{ObjectiveVector, RankedPopulation, Strategy};

use crate::error::{CliError, Result};
use crate::experiment::{DynamicRun, RunConfig, StaticRun};
use crate::io::{write_json, CsvOut};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn stats(xs: &[f64]) -> Stats {
    if xs.is_empty() {
        return Stats::default();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Stats { mean, std: var.sqrt() }
}

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    strategy: &'static str,
    ru_pct: f64,
    pw_w: f64,
    phi_pct: f64,
    theta_pct: f64,
    active_servers: usize,
    front_size: usize,
    evaluations: usize,
}

/// Per-strategy aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: &'static str,
    pub runs: usize,
    pub ru_pct_mean: f64,
    pub ru_pct_std: f64,
    pub pw_w_mean: f64,
    pub phi_pct_mean: f64,
    pub phi_pct_std: f64,
    pub theta_pct_mean: f64,
    pub theta_pct_std: f64,
    pub active_servers_mean: f64,
    pub config_hash: String,
}

/// Relative improvement of the reference strategy over another: utilization
/// gain and reductions in power, conflicts and spread, in percent of the
/// other strategy's mean. Empty when the other mean is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub reference: &'static str,
    pub strategy: &'static str,
    pub ru_pct_mean: f64,
    pub pw_w_mean: f64,
    pub phi_pct_mean: f64,
    pub theta_pct_mean: f64,
    pub ru_gain_pct: Option<f64>,
    pub pw_reduction_pct: Option<f64>,
    pub phi_reduction_pct: Option<f64>,
    pub theta_reduction_pct: Option<f64>,
    pub config_hash: String,
}

#[derive(Serialize)]
struct FrontRow {
    seed: u64,
    strategy: &'static str,
    rank: usize,
    crowding: f64,
    ru_pct: f64,
    pw_w: f64,
    phi_pct: f64,
    theta_pct: f64,
}

#[derive(Serialize)]
struct TelemetryRow {
    seed: u64,
    strategy: &'static str,
    generation: usize,
    ru_pct: f64,
    pw_w: f64,
    phi_pct: f64,
    theta_pct: f64,
    front_size: usize,
    repairs: usize,
}

#[derive(Serialize)]
struct TimingRow {
    seed: u64,
    strategy: &'static str,
    wall_ms: f64,
}

#[derive(Serialize)]
struct EpochRow {
    seed: u64,
    epoch: usize,
    ru_pct: f64,
    pw_w: f64,
    phi_pct: f64,
    theta_pct: f64,
    apms: usize,
    mg_cost: f64,
    mg_network: f64,
    mg_activation: f64,
    mg_count: usize,
    live_vms: usize,
    arrivals: usize,
    departures: usize,
}

#[derive(Serialize)]
struct MigrationRow {
    seed: u64,
    epoch: usize,
    vm_id: u32,
    source: usize,
    destination: usize,
    hops: u64,
    vm_size: f64,
    activated_server: bool,
}

/// Dynamic run totals: objective means over epochs, migration sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicSummaryRow {
    pub seed: u64,
    pub vms: usize,
    pub users: usize,
    pub epochs: usize,
    pub ru_pct: Option<f64>,
    pub pw_w: Option<f64>,
    pub phi_pct: Option<f64>,
    pub theta_pct: Option<f64>,
    pub apms: Option<f64>,
    pub mg_cost: f64,
    pub mg_count: usize,
    pub config_hash: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a RunConfig,
    config_hash: &'a str,
    seeds: Vec<u64>,
    files: Vec<&'a str>,
}

fn objective_cols(o: &ObjectiveVector) -> (f64, f64, f64, f64) {
    (o.ru * 100.0, o.pw, o.phi, o.theta)
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, hash: &str, files: &[&str]) -> Result<()> {
    let manifest = Manifest { command, config: cfg, config_hash: hash, seeds: cfg.seeds(), files: files.to_vec() };
    write_json(&out.join("manifest.json"), &manifest)
}

pub fn summarize(runs: &[StaticRun], strategies: &[Strategy], hash: &str) -> Vec<SummaryRow> {
    strategies
        .iter()
        .map(|&s| {
            let of: Vec<&ObjectiveVector> = runs.iter().filter(|r| r.strategy == s).map(|r| &r.outcome.chosen.objectives).collect();
            let col = |f: fn(&ObjectiveVector) -> f64| stats(&of.iter().map(|o| f(o)).collect::<Vec<_>>());
            let (ru, pw, phi, theta) = (col(|o| o.ru * 100.0), col(|o| o.pw), col(|o| o.phi), col(|o| o.theta));
            let active: Vec<f64> = runs.iter().filter(|r| r.strategy == s).map(|r| r.active_servers as f64).collect();
            SummaryRow {
                strategy: s.name(),
                runs: of.len(),
                ru_pct_mean: ru.mean,
                ru_pct_std: ru.std,
                pw_w_mean: pw.mean,
                phi_pct_mean: phi.mean,
                phi_pct_std: phi.std,
                theta_pct_mean: theta.mean,
                theta_pct_std: theta.std,
                active_servers_mean: stats(&active).mean,
                config_hash: hash.to_string(),
            }
        })
        .collect()
}

fn relative(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den * 100.0)
}

/// Rows comparing the first summary row against every row (itself included).
pub fn compare_rows(summary: &[SummaryRow]) -> Vec<CompareRow> {
    let Some(r) = summary.first() else { return Vec::new() };
    summary
        .iter()
        .map(|o| CompareRow {
            reference: r.strategy,
            strategy: o.strategy,
            ru_pct_mean: o.ru_pct_mean,
            pw_w_mean: o.pw_w_mean,
            phi_pct_mean: o.phi_pct_mean,
            theta_pct_mean: o.theta_pct_mean,
            ru_gain_pct: relative(r.ru_pct_mean - o.ru_pct_mean, o.ru_pct_mean),
            pw_reduction_pct: relative(o.pw_w_mean - r.pw_w_mean, o.pw_w_mean),
            phi_reduction_pct: relative(o.phi_pct_mean - r.phi_pct_mean, o.phi_pct_mean),
            theta_reduction_pct: relative(o.theta_pct_mean - r.theta_pct_mean, o.theta_pct_mean),
            config_hash: r.config_hash.clone(),
        })
        .collect()
}

/// Writes `static_runs.csv`, `static_summary.csv`, `fronts.csv`,
/// `telemetry.csv`, `timing.csv` and `manifest.json`.
pub fn write_static(out: &Path, command: &str, cfg: &RunConfig, runs: &[StaticRun]) -> Result<Vec<SummaryRow>> {
    ensure_dir(out)?;
    let hash = cfg.hash()?;

    let mut w = CsvOut::create(
        &out.join("static_runs.csv"),
        &["seed", "strategy", "ru_pct", "pw_w", "phi_pct", "theta_pct", "active_servers", "front_size", "evaluations"],
    )?;
    for r in runs {
        let (ru_pct, pw_w, phi_pct, theta_pct) = objective_cols(&r.outcome.chosen.objectives);
        w.row(&RunRow {
            seed: r.seed,
            strategy: r.strategy.name(),
            ru_pct,
            pw_w,
            phi_pct,
            theta_pct,
            active_servers: r.active_servers,
            front_size: r.outcome.front.len(),
            evaluations: r.evaluations,
        })?;
    }
    w.finish()?;

    let summary = summarize(runs, &cfg.strategies, &hash);
    let mut w = CsvOut::create(
        &out.join("static_summary.csv"),
        &[
            "strategy", "runs", "ru_pct_mean", "ru_pct_std", "pw_w_mean", "phi_pct_mean", "phi_pct_std",
            "theta_pct_mean", "theta_pct_std", "active_servers_mean", "config_hash",
        ],
    )?;
    for row in &summary {
        w.row(row)?;
    }
    w.finish()?;

    let mut w = CsvOut::create(
        &out.join("fronts.csv"),
        &["seed", "strategy", "rank", "crowding", "ru_pct", "pw_w", "phi_pct", "theta_pct"],
    )?;
    for r in runs {
        let members = r.outcome.front.solutions.iter().map(|s| ((), s.objectives)).collect();
        let ranked = RankedPopulation::new(members);
        for (i, (_, o)) in ranked.members().iter().enumerate() {
            let (ru_pct, pw_w, phi_pct, theta_pct) = objective_cols(o);
            w.row(&FrontRow {
                seed: r.seed,
                strategy: r.strategy.name(),
                rank: ranked.rank(i),
                crowding: ranked.crowding(i),
                ru_pct,
                pw_w,
                phi_pct,
                theta_pct,
            })?;
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(
        &out.join("telemetry.csv"),
        &["seed", "strategy", "generation", "ru_pct", "pw_w", "phi_pct", "theta_pct", "front_size", "repairs"],
    )?;
    for r in runs {
        for g in &r.outcome.telemetry {
            let (ru_pct, pw_w, phi_pct, theta_pct) = objective_cols(&g.best);
            w.row(&TelemetryRow {
                seed: r.seed,
                strategy: r.strategy.name(),
                generation: g.generation,
                ru_pct,
                pw_w,
                phi_pct,
                theta_pct,
                front_size: g.front_size,
                repairs: g.repairs,
            })?;
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(&out.join("timing.csv"), &["seed", "strategy", "wall_ms"])?;
    for r in runs {
        w.row(&TimingRow { seed: r.seed, strategy: r.strategy.name(), wall_ms: r.elapsed.as_secs_f64() * 1e3 })?;
    }
    w.finish()?;

    let mut files = vec!["static_runs.csv", "static_summary.csv", "fronts.csv", "telemetry.csv", "timing.csv"];
    if command == "compare" {
        let mut w = CsvOut::create(
            &out.join("compare.csv"),
            &[
                "reference", "strategy", "ru_pct_mean", "pw_w_mean", "phi_pct_mean", "theta_pct_mean", "ru_gain_pct",
                "pw_reduction_pct", "phi_reduction_pct", "theta_reduction_pct", "config_hash",
            ],
        )?;
        for row in compare_rows(&summary) {
            w.row(&row)?;
        }
        w.finish()?;
        files.push("compare.csv");
    }
    write_manifest(out, command, cfg, &hash, &files)?;
    Ok(summary)
}

pub fn dynamic_summary(run: &DynamicRun, hash: &str) -> DynamicSummaryRow {
    let n = run.epochs.len();
    let mean = |f: fn(&smvmp_core::EpochReport) -> f64| (n > 0).then(|| run.epochs.iter().map(f).sum::<f64>() / n as f64);
    DynamicSummaryRow {
        seed: run.seed,
        vms: run.vms,
        users: run.users,
        epochs: n,
        ru_pct: mean(|e| e.objectives.ru * 100.0),
        pw_w: mean(|e| e.objectives.pw),
        phi_pct: mean(|e| e.objectives.phi),
        theta_pct: mean(|e| e.objectives.theta),
        apms: mean(|e| e.active_servers as f64),
        mg_cost: run.epochs.iter().map(|e| e.cost.total).fold(0.0, |a, b| a + b),
        mg_count: run.epochs.iter().map(|e| e.migration_count()).sum(),
        config_hash: hash.to_string(),
    }
}

/// Writes `epochs.csv`, `migrations.csv`, `dynamic_summary.csv`,
/// `timing.csv` and `manifest.json`.
pub fn write_dynamic(out: &Path, cfg: &RunConfig, runs: &[DynamicRun]) -> Result<Vec<DynamicSummaryRow>> {
    ensure_dir(out)?;
    let hash = cfg.hash()?;

    let mut w = CsvOut::create(
        &out.join("epochs.csv"),
        &[
            "seed", "epoch", "ru_pct", "pw_w", "phi_pct", "theta_pct", "apms", "mg_cost", "mg_network",
            "mg_activation", "mg_count", "live_vms", "arrivals", "departures",
        ],
    )?;
    for run in runs {
        for e in &run.epochs {
            let (ru_pct, pw_w, phi_pct, theta_pct) = objective_cols(&e.objectives);
            w.row(&EpochRow {
                seed: run.seed,
                epoch: e.epoch,
                ru_pct,
                pw_w,
                phi_pct,
                theta_pct,
                apms: e.active_servers,
                mg_cost: e.cost.total,
                mg_network: e.cost.network,
                mg_activation: e.cost.activation,
                mg_count: e.migration_count(),
                live_vms: e.live_vms,
                arrivals: e.arrivals,
                departures: e.departures,
            })?;
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(
        &out.join("migrations.csv"),
        &["seed", "epoch", "vm_id", "source", "destination", "hops", "vm_size", "activated_server"],
    )?;
    for run in runs {
        for e in &run.epochs {
            for m in &e.migrations {
                w.row(&MigrationRow {
                    seed: run.seed,
                    epoch: e.epoch,
                    vm_id: m.vm_id,
                    source: m.source,
                    destination: m.destination,
                    hops: m.hops,
                    vm_size: m.vm_size,
                    activated_server: m.activated_server,
                })?;
            }
        }
    }
    w.finish()?;

    let summary: Vec<DynamicSummaryRow> = runs.iter().map(|r| dynamic_summary(r, &hash)).collect();
    let mut w = CsvOut::create(
        &out.join("dynamic_summary.csv"),
        &[
            "seed", "vms", "users", "epochs", "ru_pct", "pw_w", "phi_pct", "theta_pct", "apms", "mg_cost", "mg_count",
            "config_hash",
        ],
    )?;
    for row in &summary {
        w.row(row)?;
    }
    w.finish()?;

    let mut w = CsvOut::create(&out.join("timing.csv"), &["seed", "strategy", "wall_ms"])?;
    for r in runs {
        w.row(&TimingRow { seed: r.seed, strategy: Strategy::Woga.name(), wall_ms: r.elapsed.as_secs_f64() * 1e3 })?;
    }
    w.finish()?;

    let files = ["epochs.csv", "migrations.csv", "dynamic_summary.csv", "timing.csv"];
    write_manifest(out, "dynamic", cfg, &hash, &files)?;
    Ok(summary)
}

/// Files written by `gen-scenario`.
pub fn write_generated(out: &Path, dc: &smvmp_core::Datacenter, trace: Option<&smvmp_core::Trace>) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let scenario = out.join("scenario.json");
    write_json(&scenario, dc)?;
    let mut written = vec![scenario];
    if let Some(t) = trace {
        let p = out.join("trace.csv");
        crate::io::write_trace(&p, t)?;
        written.push(p);
    }
    Ok(written)
}
