//! Experiment inputs: the built-in server/VM catalog, synthetic
//! bag-of-tasks scenarios, and utilization traces for dynamic runs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Datacenter, ServerSpec, VmSpec};

/// Largest bag-of-tasks a single user can request.
pub const MAX_VMS_PER_USER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerType {
    pub name: String,
    pub pe: u32,
    /// Rating of each processing element.
    pub mips: f64,
    pub ram: f64,
    pub storage: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub p_idle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmType {
    pub name: String,
    pub pe: u32,
    /// Demand per processing element.
    pub mips: f64,
    pub ram: f64,
    pub storage: f64,
}

/// Server and VM configurations scenarios are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub servers: Vec<ServerType>,
    pub vms: Vec<VmType>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::builtin()
    }
}

fn server_type(name: &str, pe: u32, mips: f64, ram: f64, storage: f64, p_max: f64, p_idle: f64) -> ServerType {
    ServerType { name: name.into(), pe, mips, ram, storage, p_max, p_min: p_idle, p_idle }
}

fn vm_type(name: &str, pe: u32, mips: f64, ram: f64, storage: f64) -> VmType {
    VmType { name: name.into(), pe, mips, ram, storage }
}

impl ServerType {
    /// A server of this type; its CPU capacity is `pe * mips`.
    pub fn spec(&self, id: u32, location: i64) -> ServerSpec {
        ServerSpec {
            id,
            pe: self.pe,
            cpu: f64::from(self.pe) * self.mips,
            ram: self.ram,
            storage: self.storage,
            p_max: self.p_max,
            p_min: self.p_min,
            p_idle: self.p_idle,
            location,
        }
    }
}

impl VmType {
    /// A VM of this type; its CPU demand is `pe * mips`.
    pub fn spec(&self, id: u32, owner: u32) -> VmSpec {
        VmSpec {
            id,
            pe: self.pe,
            cpu: f64::from(self.pe) * self.mips,
            ram: self.ram,
            storage: self.storage,
            owner,
            vm_type: self.name.clone(),
        }
    }
}

impl Catalog {
    /// Three server models and four VM sizes.
    pub fn builtin() -> Self {
        Catalog {
            servers: alloc::vec![
                server_type("S1", 2, 2660.0, 4.0, 160.0, 135.0, 93.7),
                server_type("S2", 4, 3067.0, 8.0, 250.0, 113.0, 42.3),
                server_type("S3", 12, 3067.0, 16.0, 500.0, 222.0, 58.4),
            ],
            vms: alloc::vec![
                vm_type("S", 1, 500.0, 0.5, 40.0),
                vm_type("M", 2, 1000.0, 1.0, 60.0),
                vm_type("L", 3, 1500.0, 2.0, 80.0),
                vm_type("XL", 4, 2000.0, 3.0, 100.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.servers.is_empty() || self.vms.is_empty() {
            return Err(Error::InvalidScenario("catalog needs at least one server and one VM type".into()));
        }
        Ok(())
    }

    /// Sum of each server type's capacities relative to the catalog maximum
    /// per resource.
    fn capacity_scores(&self) -> Vec<f64> {
        let max = |f: fn(&ServerType) -> f64| self.servers.iter().map(f).fold(0.0, f64::max);
        let (pe, cpu, ram, st) = (max(|s| f64::from(s.pe)), max(|s| f64::from(s.pe) * s.mips), max(|s| s.ram), max(|s| s.storage));
        self.servers
            .iter()
            .map(|s| f64::from(s.pe) / pe + f64::from(s.pe) * s.mips / cpu + s.ram / ram + s.storage / st)
            .collect()
    }

    /// Server type indices from largest to smallest capacity; ties keep
    /// catalog order.
    pub fn types_by_capacity(&self) -> Vec<usize> {
        let score = self.capacity_scores();
        let mut order: Vec<usize> = (0..self.servers.len()).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
        order
    }

    /// Index of the server type with the largest capacity.
    pub fn largest_server_type(&self) -> usize {
        self.types_by_capacity()[0]
    }

    /// Server counts per type: an equal split with the remainder going to
    /// the largest type.
    pub fn server_mix(&self, n_servers: usize) -> Vec<usize> {
        let k = self.servers.len();
        let mut counts = alloc::vec![n_servers / k; k];
        counts[self.largest_server_type()] += n_servers % k;
        counts
    }
}

/// Scenario size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioShape {
    pub vms: usize,
    pub servers: usize,
    pub users: usize,
}

impl ScenarioShape {
    /// 100 VMs on 60 servers shared by 40 users.
    pub const REFERENCE: ScenarioShape = ScenarioShape { vms: 100, servers: 60, users: 40 };

    /// Static runs: servers at 60% and users at 40% of the VM count.
    pub fn static_run(vms: usize) -> Self {
        ScenarioShape { vms, servers: vms * 3 / 5, users: vms * 2 / 5 }
    }

    /// Dynamic runs: users at 20% of the VM count.
    pub fn dynamic_run(vms: usize) -> Self {
        ScenarioShape { vms, servers: vms * 3 / 5, users: (vms / 5).max(1) }
    }
}

/// Draws a bag-of-tasks size in `1..=10` per user, nudges random users up or
/// down until the sizes sum to `n_vms`, assigns VM types uniformly, and
/// lines servers up in blocks by type, largest type first.
pub fn generate_scenario<R: Rng + ?Sized>(
    catalog: &Catalog,
    n_vms: usize,
    n_servers: usize,
    n_users: usize,
    rng: &mut R,
) -> Result<Datacenter> {
    catalog.validate()?;
    if n_vms < n_users || n_vms > n_users * MAX_VMS_PER_USER {
        return Err(Error::InvalidScenario(format!(
            "{n_vms} VMs cannot be split over {n_users} users holding 1..={MAX_VMS_PER_USER} each"
        )));
    }

    let mut sizes: Vec<usize> = (0..n_users).map(|_| rng.random_range(1..=MAX_VMS_PER_USER)).collect();
    let mut total: usize = sizes.iter().sum();
    while total > n_vms {
        let u = rng.random_range(0..n_users);
        if sizes[u] > 1 {
            sizes[u] -= 1;
            total -= 1;
        }
    }
    while total < n_vms {
        let u = rng.random_range(0..n_users);
        if sizes[u] < MAX_VMS_PER_USER {
            sizes[u] += 1;
            total += 1;
        }
    }

    let mut vms = Vec::with_capacity(n_vms);
    for (u, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            let t = &catalog.vms[rng.random_range(0..catalog.vms.len())];
            vms.push(t.spec(vms.len() as u32, u as u32));
        }
    }

    let mix = catalog.server_mix(n_servers);
    let mut servers = Vec::with_capacity(n_servers);
    for t in catalog.types_by_capacity() {
        for _ in 0..mix[t] {
            let t = &catalog.servers[t];
            let i = servers.len();
            servers.push(t.spec(i as u32, i as i64));
        }
    }

    let users = (0..n_users as u32).collect();
    Datacenter::new(servers, vms, users).map_err(|e| Error::InvalidScenario(format!("{e}")))
}

/// Per-epoch trace event for one VM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEvent {
    Arrive,
    Depart,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: u32,
    pub vm_id: u32,
    pub cpu_pct: f64,
    pub mem_pct: f64,
    pub event: TraceEvent,
}

/// Utilization and lifecycle records, ordered by epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    /// Validates percentages and stably orders records by epoch.
    pub fn new(mut records: Vec<TraceRecord>) -> Result<Self> {
        for (n, r) in records.iter().enumerate() {
            for (name, v) in [("cpu_pct", r.cpu_pct), ("mem_pct", r.mem_pct)] {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::InvalidTrace(format!(
                        "record {n} (vm {}): {name} {v} outside [0, 100]",
                        r.vm_id
                    )));
                }
            }
        }
        records.sort_by_key(|r| r.epoch);
        Ok(Trace { records })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One past the last epoch mentioned.
    pub fn epoch_count(&self) -> usize {
        self.records.last().map_or(0, |r| r.epoch as usize + 1)
    }

    /// Records of one epoch.
    pub fn epoch(&self, epoch: u32) -> &[TraceRecord] {
        let start = self.records.partition_point(|r| r.epoch < epoch);
        let end = self.records.partition_point(|r| r.epoch <= epoch);
        &self.records[start..end]
    }
}

/// Random lifecycle over the VMs of `dc`: roughly 70% arrive in epoch 0,
/// then live VMs depart with probability 3% and idle ones arrive with
/// probability 5% per epoch. Every live VM reports utilization each epoch,
/// drifting around a per-VM base in [60, 100].
pub fn synthetic_trace<R: Rng + ?Sized>(dc: &Datacenter, epochs: u32, rng: &mut R) -> Trace {
    let mut base: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    let mut live: BTreeMap<u32, bool> = BTreeMap::new();
    for v in dc.vms() {
        base.insert(v.id, (rng.random_range(60.0..=100.0), rng.random_range(60.0..=100.0)));
        live.insert(v.id, false);
    }
    let jitter = |rng: &mut R, b: f64| (b + rng.random_range(-10.0..=10.0)).clamp(1.0, 100.0);

    let mut records = Vec::new();
    for epoch in 0..epochs {
        for v in dc.vms() {
            let (cb, mb) = base[&v.id];
            let is_live = live[&v.id];
            let event = if is_live {
                if epoch > 0 && rng.random_bool(0.03) { TraceEvent::Depart } else { TraceEvent::None }
            } else {
                let p = if epoch == 0 { 0.7 } else { 0.05 };
                if rng.random_bool(p) {
                    TraceEvent::Arrive
                } else {
                    continue;
                }
            };
            live.insert(v.id, event != TraceEvent::Depart);
            records.push(TraceRecord {
                epoch,
                vm_id: v.id,
                cpu_pct: round2(jitter(rng, cb)),
                mem_pct: round2(jitter(rng, mb)),
                event,
            });
        }
    }
    Trace { records }
}

fn round2(x: f64) -> f64 {
    libm::round(x * 100.0) / 100.0
}
