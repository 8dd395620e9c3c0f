//! Epoch-by-epoch dynamic placement: arrivals, departures, watermark-driven
//! migration and migration-cost accounting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{first_violation, Allocation, Datacenter, Resource, Resources, VmSpec};
use crate::objectives::{evaluate, ObjectiveVector};
use crate::pareto::dominates;
use crate::woga::{ffd_repair, optimize_with, Variant, WogaParams};
use crate::workload::{Trace, TraceEvent};

/// Energy charged for switching one idle server on, in joules.
pub const SWITCH_ON_ENERGY_J: f64 = 4260.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sensitivity {
    ComputeSensitive,
    DataSensitive,
}

/// Compute-sensitive when the CPU fraction is at least the memory fraction.
pub fn classify_fractions(cpu: f64, memory: f64) -> Sensitivity {
    if cpu >= memory {
        Sensitivity::ComputeSensitive
    } else {
        Sensitivity::DataSensitive
    }
}

/// Compares CPU and memory demand, each as a fraction of the largest
/// server capacity for that resource in `dc`.
pub fn classify(vm: &VmSpec, dc: &Datacenter) -> Sensitivity {
    let max_cpu = dc.servers().iter().map(|s| s.cpu).fold(0.0, f64::max);
    let max_mem = dc.servers().iter().map(|s| s.storage).fold(0.0, f64::max);
    classify_fractions(vm.cpu / max_cpu, vm.storage / max_mem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub vm_id: u32,
    /// Server index (equal to location order).
    pub source: usize,
    pub destination: usize,
    pub hops: u64,
    pub vm_size: f64,
    pub activated_server: bool,
}

/// Network term (hops times VM size) and activation term of the migration
/// cost, reported separately and summed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationCost {
    pub network: f64,
    pub activation: f64,
    pub total: f64,
}

impl MigrationCost {
    pub fn add(&self, other: &MigrationCost) -> MigrationCost {
        MigrationCost {
            network: self.network + other.network,
            activation: self.activation + other.activation,
            total: self.total + other.total,
        }
    }
}

/// Sums `hops * vm_size` over events plus the switch-on energy once per
/// distinct activated destination.
pub fn migration_cost(events: &[MigrationEvent]) -> MigrationCost {
    let network = events.iter().map(|e| e.hops as f64 * e.vm_size).fold(0.0, |a, b| a + b);
    let activated: BTreeSet<usize> = events.iter().filter(|e| e.activated_server).map(|e| e.destination).collect();
    let activation = activated.len() as f64 * SWITCH_ON_ENERGY_J;
    MigrationCost { network, activation, total: network + activation }
}

/// Working state for moving VMs between servers.
#[derive(Clone)]
struct Placement<'a> {
    dc: &'a Datacenter,
    alloc: Allocation,
    loads: Vec<Resources>,
    counts: Vec<usize>,
}

impl<'a> Placement<'a> {
    fn new(alloc: Allocation, dc: &'a Datacenter) -> Self {
        let loads = alloc.loads(dc);
        let mut counts = vec![0; dc.server_count()];
        for i in alloc.psi().iter().flatten() {
            counts[*i] += 1;
        }
        Placement { dc, alloc, loads, counts }
    }

    fn active(&self, i: usize) -> bool {
        self.counts[i] > 0
    }

    fn fraction(&self, load: &Resources, i: usize, r: Resource) -> f64 {
        load.get(r) / self.dc.servers()[i].capacity().get(r)
    }

    fn ru(&self, i: usize) -> f64 {
        let set = self.dc.resource_set();
        set.iter().map(|&r| self.fraction(&self.loads[i], i, r)).sum::<f64>() / set.len() as f64
    }

    fn over_capacity(&self, i: usize) -> bool {
        !self.loads[i].fits_within(&self.dc.servers()[i].capacity())
    }

    fn over_watermark(&self, i: usize, high: f64) -> bool {
        self.dc.resource_set().iter().any(|&r| self.fraction(&self.loads[i], i, r) > high)
    }

    /// Room for VM `j` on server `i`, optionally keeping every resource in
    /// the utilization set at or below `limit`.
    fn accepts(&self, i: usize, j: usize, limit: Option<f64>) -> bool {
        if !self.dc.fits(&self.loads[i], i, j) {
            return false;
        }
        let Some(limit) = limit else { return true };
        let mut after = self.loads[i];
        after.add(&self.dc.vms()[j].demand());
        self.dc.resource_set().iter().all(|&r| self.fraction(&after, i, r) <= limit)
    }

    fn choose(&self, j: usize, source: usize, limit: Option<f64>, activate: bool, excluded: &[bool]) -> Option<usize> {
        let dc = self.dc;
        let open = |i: usize| i != source && !excluded[i] && self.accepts(i, j, limit);
        let mut active = (0..dc.server_count()).filter(|&i| self.active(i) && open(i));
        let pick = match classify(&dc.vms()[j], dc) {
            Sensitivity::ComputeSensitive => active.next(),
            Sensitivity::DataSensitive => {
                let target = self.sibling_centroid(j, source);
                active.min_by_key(|&i| (dc.servers()[i].location.abs_diff(target), i))
            }
        };
        if pick.is_some() || !activate {
            return pick;
        }
        let score = capacity_scores(dc);
        let mut best: Option<usize> = None;
        for i in (0..dc.server_count()).filter(|&i| !self.active(i) && open(i)) {
            if best.is_none_or(|b| score[i] > score[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Rounded mean location of the owner's other placed VMs, or the source
    /// location when there are none.
    fn sibling_centroid(&self, j: usize, source: usize) -> i64 {
        let dc = self.dc;
        let owner = dc.vms()[j].owner;
        let locs: Vec<f64> = (0..dc.vm_count())
            .filter(|&k| k != j && dc.vms()[k].owner == owner)
            .filter_map(|k| self.alloc.server_of(k))
            .map(|i| dc.servers()[i].location as f64)
            .collect();
        if locs.is_empty() {
            return dc.servers()[source].location;
        }
        libm::round(locs.iter().sum::<f64>() / locs.len() as f64) as i64
    }

    fn relocate(&mut self, j: usize, to: usize) -> MigrationEvent {
        let from = self.alloc.server_of(j).expect("relocated VM is placed");
        let demand = self.dc.vms()[j].demand();
        let activated = !self.active(to);
        self.loads[from].sub(&demand);
        self.counts[from] -= 1;
        self.loads[to].add(&demand);
        self.counts[to] += 1;
        self.alloc.assign(j, Some(to));
        MigrationEvent {
            vm_id: self.dc.vms()[j].id,
            source: from,
            destination: to,
            hops: self.dc.hops(from, to),
            vm_size: self.dc.vms()[j].size(),
            activated_server: activated,
        }
    }

    fn vms_on(&self, i: usize) -> Vec<usize> {
        (0..self.alloc.len()).filter(|&j| self.alloc.server_of(j) == Some(i)).collect()
    }
}

/// Sum over the utilization set of each capacity relative to the largest
/// server's capacity for that resource.
fn capacity_scores(dc: &Datacenter) -> Vec<f64> {
    let set = dc.resource_set();
    let max: Vec<f64> = set
        .iter()
        .map(|&r| dc.servers().iter().map(|s| s.capacity().get(r)).fold(0.0, f64::max))
        .collect();
    dc.servers()
        .iter()
        .map(|s| set.iter().zip(&max).map(|(&r, m)| s.capacity().get(r) / m).sum())
        .collect()
}

/// Destination for moving VM `vm` off `source`. Active servers are tried
/// first: compute-sensitive VMs take the lowest-location server with room,
/// data-sensitive VMs the one closest to their siblings. Otherwise the
/// largest inactive server with room is switched on.
pub fn select_destination(vm: usize, source: usize, alloc: &Allocation, dc: &Datacenter) -> Result<usize> {
    if alloc.len() != dc.vm_count() {
        return Err(Error::LengthMismatch { expected: dc.vm_count(), got: alloc.len() });
    }
    if source >= dc.server_count() {
        return Err(Error::ServerOutOfRange(source));
    }
    if alloc.server_of(vm) != Some(source) {
        return Err(Error::InvalidParams(format!("vm {vm} is not on server {source}")));
    }
    let place = Placement::new(alloc.clone(), dc);
    place
        .choose(vm, source, None, true, &vec![false; dc.server_count()])
        .ok_or_else(|| Error::Infeasible(format!("no destination for vm {}", dc.vms()[vm].id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicParams {
    /// Servers whose mean utilization falls below this are drained.
    pub low_watermark: f64,
    /// Servers with any resource above this shed VMs.
    pub high_watermark: f64,
    pub woga: WogaParams,
}

impl Default for DynamicParams {
    fn default() -> Self {
        DynamicParams { low_watermark: 0.2, high_watermark: 0.9, woga: WogaParams::default() }
    }
}

impl DynamicParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.low_watermark, self.high_watermark);
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::InvalidParams(format!("watermarks must satisfy 0 <= low < high <= 1, got {lo} and {hi}")));
        }
        self.woga.validate()
    }
}

/// Outcome of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub objectives: ObjectiveVector,
    pub live_vms: usize,
    pub arrivals: usize,
    pub departures: usize,
    pub active_servers: usize,
    pub migrations: Vec<MigrationEvent>,
    pub cost: MigrationCost,
    /// Servers that hosted VMs before the epoch and were shut down by it.
    pub powered_off: Vec<usize>,
    /// `(vm id, server index)` for every live VM, ordered by VM id.
    pub placement: Vec<(u32, usize)>,
}

impl EpochReport {
    pub fn migration_count(&self) -> usize {
        self.migrations.len()
    }
}

struct LiveVm {
    cpu_pct: f64,
    mem_pct: f64,
    server: Option<usize>,
}

/// Replays `trace` over the VM pool and servers of `pool`. Each epoch applies
/// departures and utilization updates, sheds VMs from servers above the high
/// watermark (smallest first), drains servers below the low watermark when
/// every VM fits on another active server, then places arrivals with the
/// optimizer seeded by the incumbent allocation. An evaluated candidate
/// replaces the incumbent with arrivals first-fit placed only when it
/// dominates it; among such candidates the one relocating the fewest
/// incumbent VMs wins, then the one with the highest utilization.
pub fn run_dynamic(pool: &Datacenter, trace: &Trace, params: &DynamicParams) -> Result<Vec<EpochReport>> {
    params.validate()?;
    let index: BTreeMap<u32, usize> = pool.vms().iter().enumerate().map(|(k, v)| (v.id, k)).collect();
    if let Some(r) = trace.records().iter().find(|r| !index.contains_key(&r.vm_id)) {
        return Err(Error::InvalidTrace(format!("epoch {}: unknown vm {}", r.epoch, r.vm_id)));
    }

    let mut live: BTreeMap<u32, LiveVm> = BTreeMap::new();
    let mut reports = Vec::with_capacity(trace.epoch_count());
    for epoch in 0..trace.epoch_count() {
        let mut departures = 0;
        let mut arrivals = 0;
        for r in trace.epoch(epoch as u32) {
            match (r.event, live.get_mut(&r.vm_id)) {
                (TraceEvent::Depart, Some(_)) => {
                    live.remove(&r.vm_id);
                    departures += 1;
                }
                (TraceEvent::Depart, None) => {}
                (_, Some(vm)) => {
                    vm.cpu_pct = r.cpu_pct;
                    vm.mem_pct = r.mem_pct;
                }
                (_, None) => {
                    live.insert(r.vm_id, LiveVm { cpu_pct: r.cpu_pct, mem_pct: r.mem_pct, server: None });
                    arrivals += 1;
                }
            }
        }
        let mut powered_before = vec![false; pool.server_count()];
        if let Some(prev) = reports.last() {
            let prev: &EpochReport = prev;
            for &(_, i) in &prev.placement {
                powered_before[i] = true;
            }
        }

        let dc = epoch_datacenter(pool, &index, &live)?;
        let ids: Vec<u32> = live.keys().copied().collect();
        let alloc = Allocation::from_psi(live.values().map(|v| v.server).collect());
        let mut place = Placement::new(alloc, &dc);
        let mut events = Vec::new();

        shed_overloaded(&mut place, params.high_watermark, &mut events)?;
        drain_underused(&mut place, params, &mut events);

        let mut alloc = place.alloc.clone();
        if !alloc.is_complete() {
            let woga = WogaParams { seed: epoch_seed(params.woga.seed, epoch), ..params.woga.clone() };
            let warm = ffd_repair(&alloc, &dc).ok().map(|a| evaluate(&a, &dc).map(|o| (a, o))).transpose()?;
            let relocations = |s: &Allocation| {
                (0..s.len()).filter(|&j| alloc.server_of(j).is_some_and(|i| s.server_of(j) != Some(i))).count()
            };
            // fewest relocations among candidates dominating the warm start, then highest utilization
            let mut improving: Option<(usize, f64, Allocation)> = None;
            let out = optimize_with(&dc, &woga, Variant::Woga, &[alloc.clone()], &mut |cand, obj| {
                let Some((_, base)) = &warm else { return };
                if !dominates(obj, base) {
                    return;
                }
                let key = (relocations(cand), obj.ru);
                if improving.as_ref().is_none_or(|(n, ru, _)| key.0 < *n || (key.0 == *n && key.1 > *ru)) {
                    improving = Some((key.0, key.1, cand.clone()));
                }
            })?;
            let next = match (improving, warm) {
                (Some((_, _, a)), _) => a,
                (None, Some((a, _))) => a,
                (None, None) => out
                    .front
                    .solutions
                    .iter()
                    .min_by_key(|s| relocations(&s.allocation))
                    .map(|s| s.allocation.clone())
                    .ok_or_else(|| Error::Infeasible(format!("epoch {epoch}: no placement found")))?,
            };
            for j in 0..alloc.len() {
                if let (Some(from), Some(to)) = (alloc.server_of(j), next.server_of(j)) {
                    if from != to {
                        events.push(MigrationEvent {
                            vm_id: dc.vms()[j].id,
                            source: from,
                            destination: to,
                            hops: dc.hops(from, to),
                            vm_size: dc.vms()[j].size(),
                            activated_server: !place.active(to),
                        });
                    }
                }
            }
            alloc = next;
        }

        if let Some(i) = first_violation(&alloc, &dc)? {
            return Err(Error::Infeasible(format!("epoch {epoch}: server {i} over capacity")));
        }
        let objectives = evaluate(&alloc, &dc)?;
        let mut hosting = vec![false; pool.server_count()];
        for (vm, &id) in live.values_mut().zip(&ids) {
            let j = dc.vms().iter().position(|v| v.id == id).expect("live VM in epoch datacenter");
            vm.server = alloc.server_of(j);
            hosting[vm.server.expect("complete allocation")] = true;
        }
        let powered_off = (0..pool.server_count()).filter(|&i| powered_before[i] && !hosting[i]).collect();
        let cost = migration_cost(&events);
        reports.push(EpochReport {
            epoch,
            objectives,
            live_vms: live.len(),
            arrivals,
            departures,
            active_servers: hosting.iter().filter(|&&h| h).count(),
            migrations: events,
            cost,
            powered_off,
            placement: live.iter().map(|(&id, v)| (id, v.server.expect("placed"))).collect(),
        });
    }
    Ok(reports)
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Live VMs with demands scaled by their utilization (at least 1%), ordered
/// by VM id, on the pool's servers.
fn epoch_datacenter(pool: &Datacenter, index: &BTreeMap<u32, usize>, live: &BTreeMap<u32, LiveVm>) -> Result<Datacenter> {
    let vms: Vec<VmSpec> = live
        .iter()
        .map(|(id, state)| {
            let base = &pool.vms()[index[id]];
            let c = state.cpu_pct.max(1.0) / 100.0;
            let m = state.mem_pct.max(1.0) / 100.0;
            VmSpec { cpu: base.cpu * c, ram: base.ram * m, storage: base.storage * m, ..base.clone() }
        })
        .collect();
    let users: BTreeSet<u32> = vms.iter().map(|v| v.owner).collect();
    Datacenter::new(pool.servers().to_vec(), vms, users.into_iter().collect())
        .and_then(|dc| dc.with_resource_set(pool.resource_set().to_vec()))
        .map(|dc| dc.with_proximity_limit(pool.proximity_limit()))
        .map_err(|e| Error::Infeasible(format!("{e}")))
}

fn shed_overloaded(place: &mut Placement, high: f64, events: &mut Vec<MigrationEvent>) -> Result<()> {
    let dc = place.dc;
    let none = vec![false; dc.server_count()];
    for i in 0..dc.server_count() {
        while place.over_capacity(i) || place.over_watermark(i, high) {
            let mut on = place.vms_on(i);
            on.sort_by(|&a, &b| dc.vms()[a].size().total_cmp(&dc.vms()[b].size()).then(a.cmp(&b)));
            let hard = place.over_capacity(i);
            let moved = on.iter().find_map(|&j| {
                place
                    .choose(j, i, Some(high), true, &none)
                    .or_else(|| hard.then(|| place.choose(j, i, None, true, &none)).flatten())
                    .map(|to| (j, to))
            });
            match moved {
                Some((j, to)) => events.push(place.relocate(j, to)),
                None if hard => {
                    return Err(Error::Infeasible(format!("server {i} is over capacity and no VM can move")));
                }
                None => break,
            }
        }
    }
    Ok(())
}

fn drain_underused(place: &mut Placement, params: &DynamicParams, events: &mut Vec<MigrationEvent>) {
    let dc = place.dc;
    let mut under: Vec<(f64, usize)> = (0..dc.server_count())
        .filter(|&i| place.active(i))
        .map(|i| (place.ru(i), i))
        .filter(|&(ru, _)| ru < params.low_watermark)
        .collect();
    under.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut drained = vec![false; dc.server_count()];
    for (_, s) in under {
        if !place.active(s) || place.ru(s) >= params.low_watermark {
            continue;
        }
        let mut trial = place.clone();
        let mut moves = Vec::new();
        let mut on = trial.vms_on(s);
        on.sort_by(|&a, &b| dc.vms()[b].size().total_cmp(&dc.vms()[a].size()).then(a.cmp(&b)));
        let mut ok = true;
        for j in on {
            match trial.choose(j, s, Some(params.high_watermark), false, &drained) {
                Some(to) => moves.push(trial.relocate(j, to)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            *place = trial;
            events.extend(moves);
            drained[s] = true;
        }
    }
}
