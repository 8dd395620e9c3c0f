//! Reference allocators used for comparison runs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Datacenter, Resources};
use crate::objectives::{evaluate, ObjectiveVector};
use crate::woga::{optimize_with, GenerationStats, ParetoFront, Solution, Variant, WogaParams};

/// Random-fit gives up on a VM after this many draws per server.
pub const RANDOM_FIT_DRAWS_PER_SERVER: usize = 10;

/// Each VM in input order goes to the lowest-location server with room.
pub fn first_fit(dc: &Datacenter) -> Result<Allocation> {
    place_each(dc, |loads, j| (0..dc.server_count()).find(|&i| dc.fits(&loads[i], i, j)))
}

/// Each VM in input order goes to the server left with the least spare CPU
/// after placement; ties go to the lower location.
pub fn best_fit(dc: &Datacenter) -> Result<Allocation> {
    place_each(dc, |loads, j| {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..dc.server_count() {
            if !dc.fits(&loads[i], i, j) {
                continue;
            }
            let residual = dc.servers()[i].cpu - loads[i].cpu - dc.vms()[j].cpu;
            if best.is_none_or(|(_, r)| residual < r) {
                best = Some((i, residual));
            }
        }
        best.map(|(i, _)| i)
    })
}

/// Each VM in input order draws random servers until one has room, giving up
/// after `10 * P` draws.
pub fn random_fit<R: Rng + ?Sized>(dc: &Datacenter, rng: &mut R) -> Result<Allocation> {
    let p = dc.server_count();
    place_each(dc, |loads, j| {
        if p == 0 {
            return None;
        }
        (0..RANDOM_FIT_DRAWS_PER_SERVER * p)
            .map(|_| rng.random_range(0..p))
            .find(|&i| dc.fits(&loads[i], i, j))
    })
}

fn place_each(
    dc: &Datacenter,
    mut choose: impl FnMut(&[Resources], usize) -> Option<usize>,
) -> Result<Allocation> {
    let mut alloc = Allocation::unplaced(dc.vm_count());
    let mut loads = vec![Resources::ZERO; dc.server_count()];
    for j in 0..dc.vm_count() {
        let Some(i) = choose(&loads, j) else {
            return Err(Error::Infeasible(format!("vm {} fits on no server", dc.vms()[j].id)));
        };
        loads[i].add(&dc.vms()[j].demand());
        alloc.assign(j, Some(i));
    }
    Ok(alloc)
}

/// The search loop without the whale stage.
pub fn ga_only(dc: &Datacenter, params: &WogaParams) -> Result<ParetoFront> {
    Ok(optimize_with(dc, params, Variant::GeneticOnly, &[], &mut |_, _| {})?.front)
}

/// The search loop without crossover and mutation.
pub fn woa_only(dc: &Datacenter, params: &WogaParams) -> Result<ParetoFront> {
    Ok(optimize_with(dc, params, Variant::WhaleOnly, &[], &mut |_, _| {})?.front)
}

/// Placement strategies selectable for an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Woga,
    Ga,
    Woa,
    FirstFit,
    BestFit,
    RandomFit,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Woga,
        Strategy::Ga,
        Strategy::Woa,
        Strategy::FirstFit,
        Strategy::BestFit,
        Strategy::RandomFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Woga => "woga",
            Strategy::Ga => "ga",
            Strategy::Woa => "woa",
            Strategy::FirstFit => "first-fit",
            Strategy::BestFit => "best-fit",
            Strategy::RandomFit => "random-fit",
        }
    }

    pub fn from_name(name: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Result of running one strategy once.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    /// Single-member front for the heuristics.
    pub front: ParetoFront,
    /// The solution reported for the run.
    pub chosen: Solution,
    pub telemetry: Vec<GenerationStats>,
}

/// Runs `strategy`; heuristics draw randomness from a stream seeded by
/// `params.seed`. The observer sees every evaluated allocation.
pub fn run_strategy(
    dc: &Datacenter,
    strategy: Strategy,
    params: &WogaParams,
    observe: &mut dyn FnMut(&Allocation, &ObjectiveVector),
) -> Result<StrategyOutcome> {
    let variant = match strategy {
        Strategy::Woga => Some(Variant::Woga),
        Strategy::Ga => Some(Variant::GeneticOnly),
        Strategy::Woa => Some(Variant::WhaleOnly),
        _ => None,
    };
    if let Some(variant) = variant {
        let out = optimize_with(dc, params, variant, &[], observe)?;
        let chosen = out
            .front
            .representative()
            .cloned()
            .ok_or_else(|| Error::Infeasible("search produced no solution".into()))?;
        return Ok(StrategyOutcome { front: out.front, chosen, telemetry: out.telemetry });
    }

    let allocation = match strategy {
        Strategy::FirstFit => first_fit(dc)?,
        Strategy::BestFit => best_fit(dc)?,
        _ => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
            random_fit(dc, &mut rng)?
        }
    };
    let objectives = evaluate(&allocation, dc)?;
    observe(&allocation, &objectives);
    let chosen = Solution { allocation, objectives };
    Ok(StrategyOutcome {
        front: ParetoFront::from_solutions(vec![chosen.clone()]),
        chosen,
        telemetry: Vec::new(),
    })
}
