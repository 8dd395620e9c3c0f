//! Probability encoding of an allocation relative to a reference, the
//! encircling/search update, and decoding back into a (partial) allocation.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Allocation, Datacenter, Resources};

/// One value in [0, 1] per server: how closely that server's VMs resemble
/// the reference allocation's VMs on the same server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhaleVector(Vec<f64>);

impl WhaleVector {
    /// Clamps every value into [0, 1].
    pub fn new(values: Vec<f64>) -> Self {
        WhaleVector(values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn ones(len: usize) -> Self {
        WhaleVector(alloc::vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Similarity of one server's VM-type multiset to the reference's.
///
/// Exact match is 1. Matching types at 1/k of the reference count is 1/k.
/// Equal counts with mismatched types give 1 minus the mismatched share.
/// An empty current server is 0, as is a non-empty one against an empty
/// reference. Anything else falls back to the shared-type count over the
/// larger of the two counts.
pub fn server_similarity(reference: &[&str], current: &[&str]) -> f64 {
    match (reference.is_empty(), current.is_empty()) {
        (true, true) => return 1.0,
        (_, true) | (true, false) => return 0.0,
        _ => {}
    }
    let mut r: Vec<&str> = reference.to_vec();
    let mut c: Vec<&str> = current.to_vec();
    r.sort_unstable();
    c.sort_unstable();
    if r == c {
        return 1.0;
    }
    let shared = shared_count(&r, &c) as f64;
    if r.len() == c.len() {
        return shared / c.len() as f64;
    }
    if r.len().is_multiple_of(c.len()) && distinct(&r) == distinct(&c) {
        return c.len() as f64 / r.len() as f64;
    }
    shared / r.len().max(c.len()) as f64
}

/// Multiset intersection size of two sorted lists.
fn shared_count(a: &[&str], b: &[&str]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn distinct<'a>(sorted: &[&'a str]) -> Vec<&'a str> {
    let mut out: Vec<&str> = sorted.to_vec();
    out.dedup();
    out
}

/// Encodes `current` against `reference`, server by server.
pub fn encode(current: &Allocation, reference: &Allocation, dc: &Datacenter) -> WhaleVector {
    let p = dc.server_count();
    let cur = current.members(p);
    let refm = reference.members(p);
    let types = |ids: &[usize]| -> Vec<&str> {
        ids.iter().map(|&j| dc.vms()[j].vm_type.as_str()).collect()
    };
    WhaleVector::new(
        (0..p)
            .map(|i| server_similarity(&types(&refm[i]), &types(&cur[i])))
            .collect(),
    )
}

/// Per-member whale coefficients for one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhaleCoefficients {
    pub a: f64,
    pub c: f64,
}

/// Control parameter falling linearly from 2 at the first generation to 0
/// at `max_generations`.
pub fn control_parameter(generation: usize, max_generations: usize) -> f64 {
    if max_generations == 0 {
        return 0.0;
    }
    let t = (generation as f64 / max_generations as f64).min(1.0);
    2.0 - 2.0 * t
}

impl WhaleCoefficients {
    pub fn from_draw(x: f64, r: f64) -> Self {
        WhaleCoefficients { a: 2.0 * x * r - x, c: 2.0 * r }
    }

    pub fn sample<R: Rng + ?Sized>(generation: usize, max_generations: usize, rng: &mut R) -> Self {
        let x = control_parameter(generation, max_generations);
        Self::from_draw(x, rng.random::<f64>())
    }

    /// Encircle the best solution when |A| < 1, otherwise search around a
    /// random one.
    pub fn exploit(&self) -> bool {
        self.a.abs() < 1.0
    }
}

/// Moves `current` toward `reference`: with the reference encoded as all
/// ones, D = |C - e| and the new position is 1 - A*D, clamped to [0, 1].
pub fn whale_step(
    current: &Allocation,
    reference: &Allocation,
    coeffs: WhaleCoefficients,
    dc: &Datacenter,
) -> Allocation {
    let e = encode(current, reference, dc);
    let updated =
        WhaleVector::new(e.values().iter().map(|&v| 1.0 - coeffs.a * (coeffs.c - v).abs()).collect());
    decode(&updated, reference, current, dc)
}

/// How many VMs a server takes from the reference and from the current
/// allocation for a given position value. Reference shares round up,
/// current shares round down.
pub fn decode_shares(value: f64, reference_len: usize, current_len: usize) -> (usize, usize) {
    let r = reference_len as f64;
    let c = current_len as f64;
    if value >= 1.0 {
        (reference_len, 0)
    } else if value >= 0.75 {
        (reference_len.saturating_sub(1), current_len.min(1))
    } else if value > 0.5 {
        (libm::ceil(r * 0.5) as usize, libm::floor(c * 0.5) as usize)
    } else if value > 0.25 {
        (libm::ceil(r * 0.25) as usize, libm::floor(c * 0.75) as usize)
    } else {
        (0, current_len)
    }
}

/// Builds a new allocation server by server: the first VMs (ascending id)
/// of the reference share, then the last VMs of the current share. A VM
/// already placed earlier, or one that would overflow the server, is
/// skipped and left for repair.
pub fn decode(
    updated: &WhaleVector,
    reference: &Allocation,
    current: &Allocation,
    dc: &Datacenter,
) -> Allocation {
    let p = dc.server_count();
    let refm = reference.members(p);
    let cur = current.members(p);
    let mut out = Allocation::unplaced(dc.vm_count());
    for i in 0..p.min(updated.len()) {
        let (take_ref, take_cur) = decode_shares(updated.values()[i], refm[i].len(), cur[i].len());
        let picks = refm[i][..take_ref]
            .iter()
            .chain(cur[i][cur[i].len() - take_cur..].iter());
        let mut load = Resources::ZERO;
        for &j in picks {
            if out.server_of(j).is_none() && dc.fits(&load, i, j) {
                load.add(&dc.vms()[j].demand());
                out.assign(j, Some(i));
            }
        }
    }
    out
}
