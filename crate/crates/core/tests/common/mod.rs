//! Independent reference computations and small instance builders.
//!
//! Nothing here calls into the crate's objective, feasibility or sorting
//! code; it reads raw spec fields and an allocation's psi vector only.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use smvmp_core::{Datacenter, Resource, ServerSpec, VmSpec};

/// (ru, phi, theta, pw) recomputed from scratch.
pub type Vector = [f64; 4];

fn amount(r: Resource, pe: u32, cpu: f64, ram: f64, storage: f64) -> f64 {
    match r {
        Resource::Pe => f64::from(pe),
        Resource::Cpu => cpu,
        Resource::Ram => ram,
        Resource::Storage => storage,
    }
}

fn server_amount(s: &ServerSpec, r: Resource) -> f64 {
    amount(r, s.pe, s.cpu, s.ram, s.storage)
}

fn vm_amount(v: &VmSpec, r: Resource) -> f64 {
    amount(r, v.pe, v.cpu, v.ram, v.storage)
}

const ALL: [Resource; 4] = [Resource::Pe, Resource::Cpu, Resource::Ram, Resource::Storage];

/// Every VM is placed on an existing server and no capacity is exceeded.
pub fn feasible(dc: &Datacenter, psi: &[Option<usize>]) -> bool {
    psi.iter().all(Option::is_some) && feasible_partial(dc, psi)
}

/// Every server's summed demand stays within its capacity on all four
/// resources; unplaced VMs are allowed.
pub fn feasible_partial(dc: &Datacenter, psi: &[Option<usize>]) -> bool {
    if psi.len() != dc.vms().len() || psi.iter().flatten().any(|&i| i >= dc.servers().len()) {
        return false;
    }
    dc.servers().iter().enumerate().all(|(i, s)| {
        ALL.iter().all(|&r| {
            let used: f64 = dc
                .vms()
                .iter()
                .zip(psi)
                .filter(|(_, p)| **p == Some(i))
                .map(|(v, _)| vm_amount(v, r))
                .sum();
            used <= server_amount(s, r) * (1.0 + 1e-9)
        })
    })
}

fn server_ru(dc: &Datacenter, psi: &[Option<usize>], i: usize) -> f64 {
    let s = &dc.servers()[i];
    let set = dc.resource_set();
    let mut total = 0.0;
    for &r in set {
        let mut used = 0.0;
        for (j, v) in dc.vms().iter().enumerate() {
            if psi[j] == Some(i) {
                used += vm_amount(v, r);
            }
        }
        total += used / server_amount(s, r);
    }
    total / set.len() as f64
}

pub fn objectives(dc: &Datacenter, psi: &[Option<usize>]) -> Vector {
    let p = dc.servers().len();
    let active: Vec<usize> = (0..p).filter(|&i| psi.contains(&Some(i))).collect();

    let ru = if active.is_empty() {
        0.0
    } else {
        active.iter().map(|&i| server_ru(dc, psi, i)).sum::<f64>() / active.len() as f64
    };

    let conflicted = active
        .iter()
        .filter(|&&i| {
            let owners: BTreeSet<u32> = dc
                .vms()
                .iter()
                .zip(psi)
                .filter(|(_, s)| **s == Some(i))
                .map(|(v, _)| v.owner)
                .collect();
            owners.len() >= 2
        })
        .count();
    let phi = if p == 0 { 0.0 } else { 100.0 * conflicted as f64 / p as f64 };

    let mut spread = 0;
    for &u in dc.users() {
        let hosts: Vec<i64> = dc
            .vms()
            .iter()
            .zip(psi)
            .filter(|(v, _)| v.owner == u)
            .filter_map(|(_, s)| s.map(|i| dc.servers()[i].location))
            .collect();
        let mut widest = 0;
        for a in &hosts {
            for b in &hosts {
                widest = widest.max((a - b).unsigned_abs());
            }
        }
        if widest >= dc.proximity_limit() {
            spread += 1;
        }
    }
    let m = dc.users().len();
    let theta = if m == 0 { 0.0 } else { 100.0 * spread as f64 / m as f64 };

    let pw = active
        .iter()
        .map(|&i| {
            let s = &dc.servers()[i];
            (s.p_max - s.p_min) * server_ru(dc, psi, i) + s.p_idle
        })
        .sum();

    [ru, phi, theta, pw]
}

/// Weak-better-everywhere, strictly-better-somewhere, with ru maximized.
pub fn dominates(a: &Vector, b: &Vector) -> bool {
    let no_worse = a[0] >= b[0] && a[1] <= b[1] && a[2] <= b[2] && a[3] <= b[3];
    let better = a[0] > b[0] || a[1] < b[1] || a[2] < b[2] || a[3] < b[3];
    no_worse && better
}

/// Fronts by repeatedly peeling the members no remaining member dominates.
pub fn peel_fronts(vectors: &[Vector]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..vectors.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&k| dominates(&vectors[k], &vectors[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Every complete feasible allocation with its reference vector.
pub fn enumerate(dc: &Datacenter) -> Vec<(Vec<Option<usize>>, Vector)> {
    let p = dc.servers().len();
    let q = dc.vms().len();
    let total = p.pow(q as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let psi: Vec<Option<usize>> = (0..q)
            .map(|_| {
                let i = code % p;
                code /= p;
                Some(i)
            })
            .collect();
        if feasible(dc, &psi) {
            let v = objectives(dc, &psi);
            out.push((psi, v));
        }
    }
    out
}

/// Objective vectors of the true pareto set of an enumerable instance.
pub fn true_front(dc: &Datacenter) -> Vec<Vector> {
    let all: Vec<Vector> = enumerate(dc).into_iter().map(|(_, v)| v).collect();
    all.iter()
        .filter(|v| !all.iter().any(|w| dominates(w, v)))
        .copied()
        .collect()
}

/// True iff no feasible allocation of the instance dominates `v`.
pub fn is_pareto_optimal(front: &[Vector], v: &Vector) -> bool {
    !front.iter().any(|w| dominates(w, v))
}

/// A random datacenter with `p` servers at consecutive locations, `q` VMs
/// and `m` users, or None when the draw breaks a datacenter invariant.
pub fn small_instance<R: Rng>(rng: &mut R, p: usize, q: usize, m: usize) -> Option<Datacenter> {
    let start: i64 = rng.random_range(0..5);
    let servers = (0..p)
        .map(|i| {
            let p_idle = f64::from(rng.random_range(40..100u32));
            let p_min = p_idle + f64::from(rng.random_range(0..20u32));
            ServerSpec {
                id: 100 + i as u32,
                pe: rng.random_range(2..=8),
                cpu: f64::from(rng.random_range(1000..4000u32)),
                ram: f64::from(rng.random_range(4..32u32)),
                storage: f64::from(rng.random_range(500..3000u32)),
                p_max: p_min + f64::from(rng.random_range(50..200u32)),
                p_min,
                p_idle,
                location: start + i as i64,
            }
        })
        .collect();
    let users: Vec<u32> = (0..m as u32).map(|k| 7 + 3 * k).collect();
    let vms = (0..q)
        .map(|j| VmSpec {
            id: j as u32,
            pe: rng.random_range(1..=2),
            cpu: f64::from(rng.random_range(100..1500u32)),
            ram: f64::from(rng.random_range(1..8u32)) / 2.0,
            storage: f64::from(rng.random_range(50..900u32)),
            owner: users[rng.random_range(0..m)],
            vm_type: "t".into(),
        })
        .collect();
    Datacenter::new(servers, vms, users).ok()
}

pub fn assert_close(actual: &[f64; 4], expected: &Vector, tol: f64) -> Result<(), String> {
    for k in 0..4 {
        if (actual[k] - expected[k]).abs() > tol {
            return Err(format!("component {k}: {} vs oracle {}", actual[k], expected[k]));
        }
    }
    Ok(())
}

/// Replays `trace` over `pool` with its own live-set bookkeeping and checks
/// every report: live ids match, scaled demands fit, nothing sits on a
/// server reported as powered off, and the objectives match the reference.
pub fn check_dynamic(
    pool: &Datacenter,
    trace: &smvmp_core::Trace,
    reports: &[smvmp_core::EpochReport],
) -> Result<(), String> {
    use smvmp_core::TraceEvent;
    use std::collections::BTreeMap;

    let mut live: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for (e, report) in reports.iter().enumerate() {
        for r in trace.epoch(e as u32) {
            match r.event {
                TraceEvent::Depart => {
                    live.remove(&r.vm_id);
                }
                _ => {
                    live.insert(r.vm_id, (r.cpu_pct, r.mem_pct));
                }
            }
        }
        let placed: Vec<u32> = report.placement.iter().map(|&(id, _)| id).collect();
        if placed != live.keys().copied().collect::<Vec<_>>() {
            return Err(format!("epoch {e}: live set differs from placement"));
        }
        for &(_, s) in &report.placement {
            if report.powered_off.contains(&s) {
                return Err(format!("epoch {e}: server {s} powered off while hosting"));
            }
        }
        let vms: Vec<VmSpec> = live
            .iter()
            .map(|(id, &(c, m))| {
                let base = pool.vms().iter().find(|v| v.id == *id).expect("trace names a pool vm");
                VmSpec {
                    cpu: base.cpu * c.max(1.0) / 100.0,
                    ram: base.ram * m.max(1.0) / 100.0,
                    storage: base.storage * m.max(1.0) / 100.0,
                    ..base.clone()
                }
            })
            .collect();
        let users: BTreeSet<u32> = vms.iter().map(|v| v.owner).collect();
        let dc = Datacenter::new(pool.servers().to_vec(), vms, users.into_iter().collect())
            .and_then(|d| d.with_resource_set(pool.resource_set().to_vec()))
            .map(|d| d.with_proximity_limit(pool.proximity_limit()))
            .map_err(|err| format!("epoch {e}: {err}"))?;
        let psi: Vec<Option<usize>> = report.placement.iter().map(|&(_, s)| Some(s)).collect();
        if !feasible(&dc, &psi) {
            return Err(format!("epoch {e}: placement breaks a capacity limit"));
        }
        let o = &report.objectives;
        assert_close(&[o.ru, o.phi, o.theta, o.pw], &objectives(&dc, &psi), 1e-9)
            .map_err(|err| format!("epoch {e}: {err}"))?;
        let active = psi.iter().flatten().collect::<BTreeSet<_>>().len();
        if active != report.active_servers {
            return Err(format!("epoch {e}: {} active servers reported, {active} hosting", report.active_servers));
        }
    }
    Ok(())
}

/// Network and activation terms summed directly from the events.
pub fn event_cost(report: &smvmp_core::EpochReport) -> (f64, f64) {
    let network = report.migrations.iter().map(|m| m.hops as f64 * m.vm_size).sum();
    let activated: BTreeSet<usize> = report
        .migrations
        .iter()
        .filter(|m| m.activated_server)
        .map(|m| m.destination)
        .collect();
    (network, 4260.0 * activated.len() as f64)
}

/// The first of 200 instances drawn from `seed` that first-fit, best-fit
/// and random-fit (seeded with `seed`) all pack.
pub fn packable(seed: u64, p: usize, q: usize, m: usize) -> Option<Datacenter> {
    use rand::SeedableRng;
    use smvmp_core::{run_strategy, Strategy, WogaParams};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let params = WogaParams { seed, ..WogaParams::default() };
    (0..200).find_map(|_| {
        let dc = small_instance(&mut rng, p, q, m)?;
        let packs = |s| run_strategy(&dc, s, &params, &mut |_, _| {}).is_ok();
        [Strategy::FirstFit, Strategy::BestFit, Strategy::RandomFit].into_iter().all(packs).then_some(dc)
    })
}
