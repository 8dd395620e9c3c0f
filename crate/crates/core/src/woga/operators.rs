//! First-fit-decreasing repair and the genetic operators.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{first_violation, Allocation, Datacenter, Resources};

/// Places every unplaced VM, largest `size()` first (ties by index), on the
/// lowest-location server with room on all four resources.
pub fn ffd_repair(partial: &Allocation, dc: &Datacenter) -> Result<Allocation> {
    place_in_order(partial, dc, |a, b| dc.vms()[b].size().total_cmp(&dc.vms()[a].size()).then(a.cmp(&b)))
}

/// First-fit-decreasing with each user's VMs kept together: users in list
/// order, largest VM first within a user.
pub fn grouped_ffd(dc: &Datacenter) -> Result<Allocation> {
    let by_owner = |a: usize, b: usize| {
        dc.owner_of(a)
            .cmp(&dc.owner_of(b))
            .then(dc.vms()[b].size().total_cmp(&dc.vms()[a].size()))
            .then(a.cmp(&b))
    };
    place_in_order(&Allocation::unplaced(dc.vm_count()), dc, by_owner)
}

fn place_in_order(
    partial: &Allocation,
    dc: &Datacenter,
    order: impl Fn(usize, usize) -> core::cmp::Ordering,
) -> Result<Allocation> {
    if let Some(i) = first_violation(partial, dc)? {
        return Err(Error::CapacityViolated(i));
    }
    let mut out = partial.clone();
    let mut unplaced: Vec<usize> = (0..out.len()).filter(|&j| out.server_of(j).is_none()).collect();
    if unplaced.is_empty() {
        return Ok(out);
    }
    unplaced.sort_by(|&a, &b| order(a, b));
    let mut loads = out.loads(dc);
    for j in unplaced {
        let Some(i) = (0..dc.server_count()).find(|&i| dc.fits(&loads[i], i, j)) else {
            return Err(Error::Infeasible(format!("vm {} fits on no server", dc.vms()[j].id)));
        };
        loads[i].add(&dc.vms()[j].demand());
        out.assign(j, Some(i));
    }
    Ok(out)
}

/// Single-point crossover over the server-indexed VM lists: servers before
/// `cut` come from one parent, the rest from the other. A VM already placed
/// by the prefix is dropped from the suffix; VMs placed by neither stay
/// unplaced.
pub fn crossover_at(
    a: &Allocation,
    b: &Allocation,
    cut: usize,
    server_count: usize,
) -> (Allocation, Allocation) {
    (splice(a, b, cut, server_count), splice(b, a, cut, server_count))
}

fn splice(prefix: &Allocation, suffix: &Allocation, cut: usize, server_count: usize) -> Allocation {
    let pm = prefix.members(server_count);
    let sm = suffix.members(server_count);
    let mut child = Allocation::unplaced(prefix.len());
    for i in 0..server_count {
        let source = if i < cut { &pm[i] } else { &sm[i] };
        for &j in source {
            if child.server_of(j).is_none() {
                child.assign(j, Some(i));
            }
        }
    }
    child
}

/// Crossover with the cut drawn uniformly from `1..=P-1`. With fewer than
/// two servers the children are copies of the parents.
pub fn crossover<R: Rng + ?Sized>(
    a: &Allocation,
    b: &Allocation,
    server_count: usize,
    rng: &mut R,
) -> (Allocation, Allocation) {
    if server_count < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.random_range(1..server_count);
    crossover_at(a, b, cut, server_count)
}

/// Exchanges the whole VM sets of servers `x` and `y`, or returns `None`
/// if either side would overflow.
pub fn swap_servers(alloc: &Allocation, x: usize, y: usize, dc: &Datacenter) -> Option<Allocation> {
    let mut out = alloc.clone();
    let (mut load_x, mut load_y) = (Resources::ZERO, Resources::ZERO);
    for (j, s) in alloc.psi().iter().enumerate() {
        let demand = dc.vms()[j].demand();
        if *s == Some(x) {
            out.assign(j, Some(y));
            load_y.add(&demand);
        } else if *s == Some(y) {
            out.assign(j, Some(x));
            load_x.add(&demand);
        }
    }
    let ok = load_x.fits_within(&dc.servers()[x].capacity())
        && load_y.fits_within(&dc.servers()[y].capacity());
    ok.then_some(out)
}

/// With probability `rate`, swaps the VM sets of two distinct random
/// servers; a swap that breaks capacity is discarded.
pub fn mutate<R: Rng + ?Sized>(
    alloc: &Allocation,
    rate: f64,
    dc: &Datacenter,
    rng: &mut R,
) -> Allocation {
    let p = dc.server_count();
    if p < 2 || rng.random::<f64>() >= rate {
        return alloc.clone();
    }
    let x = rng.random_range(0..p);
    let mut y = rng.random_range(0..p - 1);
    if y >= x {
        y += 1;
    }
    swap_servers(alloc, x, y, dc).unwrap_or_else(|| alloc.clone())
}
