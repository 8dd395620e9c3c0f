//! Seeded static, dynamic and comparison runs.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smvmp_core::{
    feasible, generate_scenario, run_dynamic, run_strategy, synthetic_trace, Catalog, Datacenter, DynamicParams,
    EpochReport, ScenarioShape, Strategy, StrategyOutcome, Trace, WogaParams,
};

use crate::error::{CliError, Result};
use crate::io;

/// Everything a run depends on besides the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategies: Vec<Strategy>,
    pub shape: ScenarioShape,
    /// Fixed scenario file used instead of generating one per seed.
    pub scenario: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Synthetic trace length when no trace file is given.
    pub epochs: u32,
    pub seed: u64,
    pub repeat: usize,
    pub woga: WogaParams,
    pub low_watermark: f64,
    pub high_watermark: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dynamic = DynamicParams::default();
        RunConfig {
            strategies: vec![Strategy::Woga],
            shape: ScenarioShape::REFERENCE,
            scenario: None,
            catalog: None,
            trace: None,
            epochs: 50,
            seed: 0,
            repeat: 25,
            woga: WogaParams::default(),
            low_watermark: dynamic.low_watermark,
            high_watermark: dynamic.high_watermark,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeat == 0 {
            return Err(CliError::Config("repeat must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(CliError::Config("at least one strategy is required".into()));
        }
        self.woga.validate()?;
        self.dynamic_params(0).validate()?;
        Ok(())
    }

    /// One seed per repeat, counting up from `seed`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeat as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    fn dynamic_params(&self, seed: u64) -> DynamicParams {
        DynamicParams {
            low_watermark: self.low_watermark,
            high_watermark: self.high_watermark,
            woga: WogaParams { seed, ..self.woga.clone() },
        }
    }

    /// SHA-256 over the config and the bytes of every input file it names.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        for path in [&self.scenario, &self.catalog, &self.trace].into_iter().flatten() {
            h.update(fs::read(path).map_err(|e| CliError::io(path, e))?);
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn load_catalog(&self) -> Result<Catalog> {
        self.catalog.as_deref().map_or_else(|| Ok(Catalog::builtin()), io::load_catalog)
    }

    /// The scenario for `seed`, advancing `rng` when one is generated.
    fn scenario(&self, catalog: &Catalog, fixed: Option<&Datacenter>, rng: &mut ChaCha8Rng) -> Result<Datacenter> {
        match fixed {
            Some(dc) => Ok(dc.clone()),
            None => Ok(generate_scenario(catalog, self.shape.vms, self.shape.servers, self.shape.users, rng)?),
        }
    }

    fn fixed_scenario(&self) -> Result<Option<Datacenter>> {
        self.scenario.as_deref().map(io::load_scenario).transpose()
    }
}

/// One strategy on one seed.
#[derive(Debug, Clone)]
pub struct StaticRun {
    pub seed: u64,
    pub strategy: Strategy,
    pub outcome: StrategyOutcome,
    pub active_servers: usize,
    pub evaluations: usize,
    pub elapsed: Duration,
}

/// Runs every configured strategy on the same scenario for each seed.
/// Results are ordered by seed, then by strategy as configured.
pub fn run_static(cfg: &RunConfig) -> Result<Vec<StaticRun>> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    let fixed = cfg.fixed_scenario()?;
    let per_seed: Vec<Vec<StaticRun>> = cfg
        .seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dc = cfg.scenario(&catalog, fixed.as_ref(), &mut rng)?;
            cfg.strategies.iter().map(|&s| run_one(&dc, s, &cfg.woga, seed)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn run_one(dc: &Datacenter, strategy: Strategy, woga: &WogaParams, seed: u64) -> Result<StaticRun> {
    let params = WogaParams { seed, ..woga.clone() };
    let mut evaluations = 0;
    let mut violation = None;
    let start = Instant::now();
    let outcome = run_strategy(dc, strategy, &params, &mut |alloc, _| {
        evaluations += 1;
        if violation.is_none() && !matches!(feasible(alloc, dc), Ok(true)) {
            violation = Some(alloc.clone());
        }
    })?;
    let elapsed = start.elapsed();
    if violation.is_some() {
        return Err(smvmp_core::Error::Infeasible(format!("{} produced an infeasible allocation", strategy.name())).into());
    }
    let active_servers = outcome.chosen.allocation.gamma(dc.server_count()).iter().filter(|&&g| g).count();
    Ok(StaticRun { seed, strategy, outcome, active_servers, evaluations, elapsed })
}

/// One seeded dynamic run.
#[derive(Debug, Clone)]
pub struct DynamicRun {
    pub seed: u64,
    pub vms: usize,
    pub users: usize,
    pub epochs: Vec<EpochReport>,
    pub elapsed: Duration,
}

/// Replays the trace file, or a synthetic trace drawn after the scenario
/// from the same seeded stream, once per seed.
pub fn run_dynamic_all(cfg: &RunConfig) -> Result<Vec<DynamicRun>> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    let fixed = cfg.fixed_scenario()?;
    let trace_file = cfg.trace.as_deref().map(io::load_trace).transpose()?;
    cfg.seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pool = cfg.scenario(&catalog, fixed.as_ref(), &mut rng)?;
            let trace = match &trace_file {
                Some(t) => t.clone(),
                None => synthetic_trace(&pool, cfg.epochs, &mut rng),
            };
            let start = Instant::now();
            let epochs = run_dynamic(&pool, &trace, &cfg.dynamic_params(seed))?;
            Ok(DynamicRun { seed, vms: pool.vm_count(), users: pool.user_count(), epochs, elapsed: start.elapsed() })
        })
        .collect()
}

/// Builds the scenario for `cfg.seed` and, when `epochs > 0`, a synthetic
/// trace from the same stream.
pub fn generate(cfg: &RunConfig) -> Result<(Datacenter, Option<Trace>)> {
    let catalog = cfg.load_catalog()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dc = cfg.scenario(&catalog, None, &mut rng)?;
    let trace = (cfg.epochs > 0).then(|| synthetic_trace(&dc, cfg.epochs, &mut rng));
    Ok((dc, trace))
}
