//! The four placement objectives: resource utilization, conflicting
//! (multi-tenant) servers, communication spread and power draw.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_shape, first_violation, Allocation, Datacenter, Resources};

/// Fitness of an allocation. `ru` is maximized, the rest minimized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Datacenter resource utilization as a fraction in [0, 1].
    pub ru: f64,
    /// Percentage of servers hosting VMs of two or more users.
    #[serde(rename = "conflicting_pct")]
    pub phi: f64,
    /// Percentage of users whose VMs span at least the proximity limit.
    #[serde(rename = "comm_cost_pct")]
    pub theta: f64,
    /// Watts for a single evaluation, watt-epochs once aggregated.
    #[serde(rename = "power_w")]
    pub pw: f64,
}

impl ObjectiveVector {
    pub const ZERO: ObjectiveVector = ObjectiveVector { ru: 0.0, phi: 0.0, theta: 0.0, pw: 0.0 };

    /// The objectives in minimization form: `[-ru, phi, theta, pw]`.
    pub fn as_minimization(&self) -> [f64; 4] {
        [-self.ru, self.phi, self.theta, self.pw]
    }
}

/// Per-epoch samples of the objectives; the aggregate stands in for the
/// time integral over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSeries {
    pub epoch_duration: f64,
    pub samples: Vec<ObjectiveVector>,
}

impl EpochSeries {
    pub fn new(epoch_duration: f64) -> Self {
        EpochSeries { epoch_duration, samples: Vec::new() }
    }

    pub fn push(&mut self, sample: ObjectiveVector) {
        self.samples.push(sample);
    }

    /// Component-wise sum of `sample * epoch_duration`.
    pub fn aggregate(&self) -> ObjectiveVector {
        let mut acc = ObjectiveVector::ZERO;
        for s in &self.samples {
            acc.ru += s.ru * self.epoch_duration;
            acc.phi += s.phi * self.epoch_duration;
            acc.theta += s.theta * self.epoch_duration;
            acc.pw += s.pw * self.epoch_duration;
        }
        acc
    }

    /// Component-wise mean over epochs; zero for an empty series.
    pub fn mean(&self) -> ObjectiveVector {
        if self.samples.is_empty() {
            return ObjectiveVector::ZERO;
        }
        let n = self.samples.len() as f64;
        let mut acc = ObjectiveVector::ZERO;
        for s in &self.samples {
            acc.ru += s.ru;
            acc.phi += s.phi;
            acc.theta += s.theta;
            acc.pw += s.pw;
        }
        ObjectiveVector { ru: acc.ru / n, phi: acc.phi / n, theta: acc.theta / n, pw: acc.pw / n }
    }
}

/// Per-resource fraction of server capacity in use.
pub fn server_utilization(alloc: &Allocation, dc: &Datacenter, server: usize) -> Result<Resources> {
    check_shape(alloc, dc)?;
    if server >= dc.server_count() {
        return Err(Error::ServerOutOfRange(server));
    }
    let mut load = Resources::ZERO;
    for (j, s) in alloc.psi().iter().enumerate() {
        if *s == Some(server) {
            load.add(&dc.vms()[j].demand());
        }
    }
    Ok(fractions(&load, dc, server))
}

fn fractions(load: &Resources, dc: &Datacenter, server: usize) -> Resources {
    let cap = dc.servers()[server].capacity();
    Resources {
        pe: load.pe / cap.pe,
        cpu: load.cpu / cap.cpu,
        ram: load.ram / cap.ram,
        storage: load.storage / cap.storage,
    }
}

/// Mean of a server's fractions over the datacenter's resource set.
pub fn server_ru(fractions: &Resources, dc: &Datacenter) -> f64 {
    let set = dc.resource_set();
    set.iter().map(|&r| fractions.get(r)).sum::<f64>() / set.len() as f64
}

pub fn ru_datacenter(alloc: &Allocation, dc: &Datacenter) -> Result<f64> {
    Ok(Snapshot::new(alloc, dc)?.ru())
}

pub fn conflicting_servers(alloc: &Allocation, dc: &Datacenter) -> Result<f64> {
    Ok(Snapshot::new(alloc, dc)?.conflicting_pct())
}

pub fn communication_cost(alloc: &Allocation, dc: &Datacenter) -> Result<f64> {
    Ok(Snapshot::new(alloc, dc)?.comm_cost_pct())
}

pub fn power(alloc: &Allocation, dc: &Datacenter) -> Result<f64> {
    Ok(Snapshot::new(alloc, dc)?.power())
}

/// All four objectives. Fails if the allocation breaks a capacity limit.
pub fn evaluate(alloc: &Allocation, dc: &Datacenter) -> Result<ObjectiveVector> {
    if let Some(i) = first_violation(alloc, dc)? {
        return Err(Error::CapacityViolated(i));
    }
    let snap = Snapshot::new(alloc, dc)?;
    Ok(ObjectiveVector {
        ru: snap.ru(),
        phi: snap.conflicting_pct(),
        theta: snap.comm_cost_pct(),
        pw: snap.power(),
    })
}

/// Loads and membership computed once per allocation.
struct Snapshot<'a> {
    dc: &'a Datacenter,
    alloc: &'a Allocation,
    loads: Vec<Resources>,
    counts: Vec<usize>,
}

impl<'a> Snapshot<'a> {
    fn new(alloc: &'a Allocation, dc: &'a Datacenter) -> Result<Self> {
        check_shape(alloc, dc)?;
        let mut counts = vec![0usize; dc.server_count()];
        for &i in alloc.psi().iter().flatten() {
            counts[i] += 1;
        }
        Ok(Snapshot { dc, alloc, loads: alloc.loads(dc), counts })
    }

    fn server_ru(&self, i: usize) -> f64 {
        server_ru(&fractions(&self.loads[i], self.dc, i), self.dc)
    }

    fn ru(&self) -> f64 {
        let active: Vec<usize> = (0..self.counts.len()).filter(|&i| self.counts[i] > 0).collect();
        if active.is_empty() {
            return 0.0;
        }
        let total: f64 = active.iter().map(|&i| self.server_ru(i)).sum();
        total / active.len() as f64
    }

    fn conflicting_pct(&self) -> f64 {
        let p = self.dc.server_count();
        if p == 0 {
            return 0.0;
        }
        // first owner seen per server, and whether a second one showed up
        let mut first_owner: Vec<Option<usize>> = vec![None; p];
        let mut conflicted = vec![false; p];
        for (j, s) in self.alloc.psi().iter().enumerate() {
            if let Some(i) = *s {
                let k = self.dc.owner_of(j);
                match first_owner[i] {
                    None => first_owner[i] = Some(k),
                    Some(o) if o != k => conflicted[i] = true,
                    _ => {}
                }
            }
        }
        100.0 * conflicted.iter().filter(|&&c| c).count() as f64 / p as f64
    }

    fn comm_cost_pct(&self) -> f64 {
        let m = self.dc.user_count();
        if m == 0 {
            return 0.0;
        }
        let mut span: Vec<Option<(i64, i64)>> = vec![None; m];
        for (j, s) in self.alloc.psi().iter().enumerate() {
            if let Some(i) = *s {
                let loc = self.dc.servers()[i].location;
                let entry = &mut span[self.dc.owner_of(j)];
                *entry = Some(match *entry {
                    None => (loc, loc),
                    Some((lo, hi)) => (lo.min(loc), hi.max(loc)),
                });
            }
        }
        let limit = self.dc.proximity_limit();
        let spread = span
            .iter()
            .flatten()
            .filter(|(lo, hi)| hi.abs_diff(*lo) >= limit)
            .count();
        100.0 * spread as f64 / m as f64
    }

    fn power(&self) -> f64 {
        (0..self.counts.len())
            .filter(|&i| self.counts[i] > 0)
            .map(|i| {
                let s = &self.dc.servers()[i];
                (s.p_max - s.p_min) * self.server_ru(i) + s.p_idle
            })
            .sum()
    }
}
