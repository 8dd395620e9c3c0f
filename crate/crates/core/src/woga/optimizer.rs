use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{whale_step, WhaleCoefficients};
use super::operators::{crossover, ffd_repair, grouped_ffd, mutate};
use crate::baselines::first_fit;
use crate::error::{Error, Result};
use crate::model::{check_shape, random_allocation, Allocation, Datacenter};
use crate::objectives::{evaluate, ObjectiveVector};
use crate::pareto::{dominates, RankedPopulation};

/// Search parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WogaParams {
    /// Population size X.
    pub population_size: usize,
    /// Generation cap Gmax.
    pub max_iterations: usize,
    /// Stop after this many generations without a new front-0 vector.
    pub stall_limit: usize,
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for WogaParams {
    fn default() -> Self {
        WogaParams {
            population_size: 20,
            max_iterations: 100,
            stall_limit: 15,
            mutation_rate: 0.2,
            seed: 0,
        }
    }
}

impl WogaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidParams("population size must be at least 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParams("max iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidParams(format!(
                "mutation rate {} outside [0, 1]",
                self.mutation_rate
            )));
        }
        Ok(())
    }
}

/// Which stages of the loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Whale update followed by crossover and mutation.
    Woga,
    /// Crossover and mutation only.
    GeneticOnly,
    /// Whale update only.
    WhaleOnly,
}

impl Variant {
    fn whale(self) -> bool {
        matches!(self, Variant::Woga | Variant::WhaleOnly)
    }

    fn genetic(self) -> bool {
        matches!(self, Variant::Woga | Variant::GeneticOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: Allocation,
    pub objectives: ObjectiveVector,
}

/// Mutually non-dominated solutions, ordered by descending utilization,
/// then ascending power, conflicts and spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub solutions: Vec<Solution>,
}

impl ParetoFront {
    pub fn from_solutions(mut solutions: Vec<Solution>) -> Self {
        solutions.sort_by(|a, b| {
            let (x, y) = (&a.objectives, &b.objectives);
            y.ru.total_cmp(&x.ru)
                .then(x.pw.total_cmp(&y.pw))
                .then(x.phi.total_cmp(&y.phi))
                .then(x.theta.total_cmp(&y.theta))
                .then_with(|| a.allocation.cmp(&b.allocation))
        });
        ParetoFront { solutions }
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// The member picked by crowding distance over this front's order.
    pub fn representative(&self) -> Option<&Solution> {
        let ranked = RankedPopulation::new(
            self.solutions.iter().map(|s| ((), s.objectives)).collect(),
        );
        ranked.best_index().map(|i| &self.solutions[i])
    }
}

/// Per-generation convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: ObjectiveVector,
    pub front_size: usize,
    /// Candidates that needed first-fit-decreasing repair this generation.
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    /// Every non-dominated objective vector seen during the run, one
    /// allocation each.
    pub front: ParetoFront,
    pub telemetry: Vec<GenerationStats>,
    pub evaluations: usize,
}

/// Runs the full hybrid search.
pub fn optimize(dc: &Datacenter, params: &WogaParams) -> Result<OptimizeOutcome> {
    optimize_with(dc, params, Variant::Woga, &[], &mut |_, _| {})
}

/// The search loop with a stage selection, optional warm-start allocations
/// (repaired and placed first in the initial population), and an observer
/// called for every evaluated candidate. The next member is the owner-grouped
/// packing; the rest are repaired random draws.
pub fn optimize_with(
    dc: &Datacenter,
    params: &WogaParams,
    variant: Variant,
    incumbents: &[Allocation],
    observe: &mut dyn FnMut(&Allocation, &ObjectiveVector),
) -> Result<OptimizeOutcome> {
    params.validate()?;
    let x = params.population_size;
    let repaired_incumbents: Vec<Option<Allocation>> = incumbents
        .iter()
        .take(x)
        .map(|inc| check_shape(inc, dc).map(|_| ffd_repair(inc, dc).ok()))
        .collect::<Result<_>>()?;
    let mut drawn: Vec<Option<Allocation>> = Vec::with_capacity(x);
    if repaired_incumbents.len() < x {
        drawn.push(grouped_ffd(dc).ok());
    }
    drawn.extend(
        (repaired_incumbents.len() + 1..x)
            .map(|k| ffd_repair(&random_allocation(dc, &mut member_rng(params.seed, 0, k)), dc).ok()),
    );
    let fallback = ffd_repair(&Allocation::unplaced(dc.vm_count()), dc)
        .or_else(|_| first_fit(dc))
        .ok()
        .or_else(|| repaired_incumbents.iter().chain(&drawn).flatten().next().cloned())
        .ok_or_else(|| Error::Infeasible("no packing found for the initial population".into()))?;

    let mut search = Search { dc, params, variant, archive: Archive::default(), evaluations: 0, observe };
    let mut initial = Vec::with_capacity(x);
    for candidate in repaired_incumbents.into_iter().chain(drawn) {
        initial.push(search.evaluate(candidate.unwrap_or_else(|| fallback.clone()))?);
    }

    let mut population = RankedPopulation::new(initial);
    let mut telemetry = Vec::new();
    let mut stall = 0;
    let mut front_vectors = front_set(&population);
    for g in 0..params.max_iterations {
        let (next, repairs) = search.generation(&population, g)?;
        population = next;
        let best = population
            .best_index()
            .map(|i| population.members()[i].1)
            .unwrap_or_default();
        telemetry.push(GenerationStats {
            generation: g,
            best,
            front_size: population.fronts().first().map_or(0, Vec::len),
            repairs,
        });
        let vectors = front_set(&population);
        if vectors.is_subset(&front_vectors) {
            stall += 1;
        } else {
            stall = 0;
        }
        front_vectors = vectors;
        if params.stall_limit > 0 && stall >= params.stall_limit {
            break;
        }
    }

    Ok(OptimizeOutcome {
        front: ParetoFront::from_solutions(search.archive.solutions),
        telemetry,
        evaluations: search.evaluations,
    })
}

/// Independent random stream per (generation, member) so results do not
/// depend on evaluation order.
fn member_rng(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | member as u64);
    rng
}

type Member = (Allocation, ObjectiveVector);

fn bits(v: &ObjectiveVector) -> [u64; 4] {
    [v.ru.to_bits(), v.phi.to_bits(), v.theta.to_bits(), v.pw.to_bits()]
}

fn front_set(pop: &RankedPopulation<Allocation>) -> BTreeSet<[u64; 4]> {
    pop.fronts()
        .first()
        .map(|f| f.iter().map(|&i| bits(&pop.members()[i].1)).collect())
        .unwrap_or_default()
}

struct Search<'a> {
    dc: &'a Datacenter,
    params: &'a WogaParams,
    variant: Variant,
    archive: Archive,
    evaluations: usize,
    observe: &'a mut dyn FnMut(&Allocation, &ObjectiveVector),
}

impl Search<'_> {
    fn evaluate(&mut self, allocation: Allocation) -> Result<Member> {
        // evaluate() rejects any capacity violation
        let objectives = evaluate(&allocation, self.dc)?;
        if !allocation.is_complete() {
            return Err(Error::Infeasible("candidate left a VM unplaced".into()));
        }
        self.evaluations += 1;
        (self.observe)(&allocation, &objectives);
        self.archive.offer(&allocation, &objectives);
        Ok((allocation, objectives))
    }

    fn repair_or(&self, candidate: Allocation, parent: &Allocation, repairs: &mut usize) -> Allocation {
        if candidate.is_complete() {
            return candidate;
        }
        *repairs += 1;
        ffd_repair(&candidate, self.dc).unwrap_or_else(|_| parent.clone())
    }

    /// One generation: whale update, crossover + mutation, merge with the
    /// parents and truncate back to X.
    fn generation(
        &mut self,
        population: &RankedPopulation<Allocation>,
        g: usize,
    ) -> Result<(RankedPopulation<Allocation>, usize)> {
        let dc = self.dc;
        let x = self.params.population_size;
        let members = population.members();
        let best = &members[population.best_index().unwrap_or(0)].0;
        let mut repairs = 0;
        let mut rngs: Vec<ChaCha8Rng> =
            (0..x).map(|k| member_rng(self.params.seed, g + 1, k)).collect();

        let mut updated: Vec<Allocation> = Vec::with_capacity(x);
        for (k, rng) in rngs.iter_mut().enumerate() {
            let current = &members[k].0;
            if !self.variant.whale() {
                updated.push(current.clone());
                continue;
            }
            let coeffs = WhaleCoefficients::sample(g, self.params.max_iterations, rng);
            let reference = if coeffs.exploit() { best } else { &members[rng.random_range(0..x)].0 };
            let stepped = whale_step(current, reference, coeffs, dc);
            updated.push(self.repair_or(stepped, current, &mut repairs));
        }

        let mut children: Vec<Allocation> = Vec::new();
        if self.variant.genetic() {
            for (k, rng) in rngs.iter_mut().enumerate() {
                let mut partner = rng.random_range(0..x - 1);
                if partner >= k {
                    partner += 1;
                }
                let (a, b) = (&updated[k], &updated[partner]);
                let (c1, c2) = crossover(a, b, dc.server_count(), rng);
                let c1 = mutate(&c1, self.params.mutation_rate, dc, rng);
                let c2 = mutate(&c2, self.params.mutation_rate, dc, rng);
                children.push(self.repair_or(c1, a, &mut repairs));
                children.push(self.repair_or(c2, b, &mut repairs));
            }
        }

        let mut seen: BTreeSet<Allocation> = BTreeSet::new();
        let mut merged: Vec<Member> = Vec::with_capacity(x + updated.len() + children.len());
        let mut spare: Vec<Member> = Vec::new();
        for m in members.iter() {
            if seen.insert(m.0.clone()) {
                merged.push(m.clone());
            } else {
                spare.push(m.clone());
            }
        }
        for candidate in updated.into_iter().chain(children) {
            if seen.contains(&candidate) {
                continue;
            }
            seen.insert(candidate.clone());
            merged.push(self.evaluate(candidate)?);
        }

        let unique = merged.len();
        let mut next = RankedPopulation::new(merged).truncate(x.min(unique))?;
        if next.len() < x {
            // too few distinct allocations: pad with copies of the survivors
            let mut padded = next.into_members();
            padded.extend(spare.into_iter().take(x - padded.len()));
            let mut k = 0;
            while padded.len() < x {
                padded.push(padded[k].clone());
                k += 1;
            }
            next = RankedPopulation::new(padded);
        }
        Ok((next, repairs))
    }
}

/// Non-dominated archive keyed by objective vector.
#[derive(Default)]
struct Archive {
    solutions: Vec<Solution>,
}

impl Archive {
    fn offer(&mut self, allocation: &Allocation, objectives: &ObjectiveVector) {
        let key = bits(objectives);
        if self
            .solutions
            .iter()
            .any(|s| bits(&s.objectives) == key || dominates(&s.objectives, objectives))
        {
            return;
        }
        self.solutions.retain(|s| !dominates(objectives, &s.objectives));
        self.solutions.push(Solution { allocation: allocation.clone(), objectives: *objectives });
    }
}
