//! Non-dominated sorting, crowding distance and front-by-front truncation.
//!
//! Every tie is broken by member index so that seeded runs replay exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::objectives::ObjectiveVector;

/// True iff `a` is no worse than `b` everywhere and strictly better somewhere
/// (utilization maximized, the other three minimized).
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let (a, b) = (a.as_minimization(), b.as_minimization());
    let mut strictly = false;
    for k in 0..4 {
        if a[k] > b[k] {
            return false;
        }
        if a[k] < b[k] {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Returns fronts by rank, each holding member
/// indices in ascending order.
pub fn non_dominated_sort(objectives: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates(&objectives[p], &objectives[q]) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(&objectives[q], &objectives[p]) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front, normalized by the
/// front's own per-objective range. Fronts of one or two members are all
/// boundary points; an objective that is constant across the front adds
/// nothing to anyone.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut distance = vec![0.0; n];
    let values: Vec<[f64; 4]> = front.iter().map(ObjectiveVector::as_minimization).collect();
    for k in 0..4 {
        let mut order: Vec<usize> = (0..n).collect();
        // stable sort keeps index order among equal values
        order.sort_by(|&a, &b| values[a][k].total_cmp(&values[b][k]));
        let lo = values[order[0]][k];
        let hi = values[order[n - 1]][k];
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let m = order[w];
            if distance[m].is_finite() {
                distance[m] += (values[order[w + 1]][k] - values[order[w - 1]][k]) / range;
            }
        }
    }
    distance
}

/// A population sorted into dominance fronts with crowding distances.
#[derive(Debug, Clone)]
pub struct RankedPopulation<T> {
    members: Vec<(T, ObjectiveVector)>,
    fronts: Vec<Vec<usize>>,
    rank: Vec<usize>,
    crowding: Vec<f64>,
}

impl<T> RankedPopulation<T> {
    pub fn new(members: Vec<(T, ObjectiveVector)>) -> Self {
        let objectives: Vec<ObjectiveVector> = members.iter().map(|m| m.1).collect();
        let fronts = non_dominated_sort(&objectives);
        let mut rank = vec![0; members.len()];
        let mut crowding = vec![0.0; members.len()];
        for (r, front) in fronts.iter().enumerate() {
            let objs: Vec<ObjectiveVector> = front.iter().map(|&i| objectives[i]).collect();
            for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
                rank[i] = r;
                crowding[i] = d;
            }
        }
        RankedPopulation { members, fronts, rank, crowding }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[(T, ObjectiveVector)] {
        &self.members
    }

    pub fn into_members(self) -> Vec<(T, ObjectiveVector)> {
        self.members
    }

    pub fn fronts(&self) -> &[Vec<usize>] {
        &self.fronts
    }

    pub fn rank(&self, i: usize) -> usize {
        self.rank[i]
    }

    pub fn crowding(&self, i: usize) -> f64 {
        self.crowding[i]
    }

    /// Index of the front-0 member with the largest crowding distance,
    /// lowest index on ties.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &i in self.fronts.first()? {
            match best {
                Some(b) if self.crowding[i] <= self.crowding[b] => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Keeps `x` members, front by front; the last admitted front is cut by
    /// descending crowding distance. The survivors are re-ranked.
    pub fn truncate(self, x: usize) -> Result<Self> {
        if x > self.members.len() {
            return Err(Error::TruncateTooLarge { size: self.members.len(), requested: x });
        }
        let mut keep: Vec<usize> = Vec::with_capacity(x);
        for front in &self.fronts {
            if keep.len() + front.len() <= x {
                keep.extend_from_slice(front);
            } else {
                let mut by_crowding = front.clone();
                by_crowding.sort_by(|&a, &b| self.crowding[b].total_cmp(&self.crowding[a]));
                keep.extend(by_crowding.into_iter().take(x - keep.len()));
            }
            if keep.len() == x {
                break;
            }
        }
        let mut slots: Vec<Option<(T, ObjectiveVector)>> =
            self.members.into_iter().map(Some).collect();
        let survivors = keep.into_iter().filter_map(|i| slots[i].take()).collect();
        Ok(RankedPopulation::new(survivors))
    }
}

/// The preferred member of a ranked population, see [`RankedPopulation::best_index`].
pub fn select_best<T>(ranked: &RankedPopulation<T>) -> Option<&(T, ObjectiveVector)> {
    ranked.best_index().map(|i| &ranked.members[i])
}

pub fn truncate<T>(ranked: RankedPopulation<T>, x: usize) -> Result<RankedPopulation<T>> {
    ranked.truncate(x)
}
