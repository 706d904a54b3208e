// SPDX-License-Identifier: Apache-2.0

//! Bipartite predecessor/successor graph and its maximum-weight matching.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::affinity::{ModelBundle, Signature};
use crate::assignment::min_cost_assignment;
use crate::error::Result;
use crate::scalar::Real;
use crate::tracker::{temporal_precedes, SubTrajectory, SubTrajectoryId};

pub const DEFAULT_TAU_NOMATCH: f64 = 0.05;

/// `V1` holds sub-trajectories with at least one possible successor, `V2`
/// those with at least one possible predecessor; both sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph<T> {
    pub v1: Vec<SubTrajectoryId>,
    pub v2: Vec<SubTrajectoryId>,
    /// `|V1| x |V2|`; `None` where the temporal relation does not hold.
    pub weights: Vec<Vec<Option<T>>>,
    /// Every sub-trajectory of the window, sorted.
    pub nodes: Vec<SubTrajectoryId>,
    /// Weight of matching a node to its private dummy partner.
    pub tau: T,
}

impl<T: Real> AffinityGraph<T> {
    /// Real edges as `(u, v, w)` in `(u, v)` order.
    pub fn edges(&self) -> Vec<(SubTrajectoryId, SubTrajectoryId, T)> {
        let mut out = Vec::new();
        for (i, row) in self.weights.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                if let Some(w) = w {
                    out.push((self.v1[i], self.v2[j], *w));
                }
            }
        }
        out
    }
}

/// Builds the graph with an arbitrary edge weight.
///
/// `can_precede[i]` / `can_follow[i]` restrict which items may take the
/// predecessor / successor role.
pub fn build_graph_with<T: Real, F>(
    subs: &[&SubTrajectory<T>],
    can_precede: &[bool],
    can_follow: &[bool],
    tau: T,
    mut weight: F,
) -> Result<AffinityGraph<T>>
where
    F: FnMut(usize, usize) -> Result<T>,
{
    let mut order: Vec<usize> = (0..subs.len()).collect();
    order.sort_by_key(|&i| subs[i].id);
    let mut edges: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for &i in &order {
        if !can_precede[i] {
            continue;
        }
        for &j in &order {
            if can_follow[j] && i != j && temporal_precedes(subs[i], subs[j]) {
                edges.insert((i, j), weight(i, j)?);
            }
        }
    }
    let v1_idx: Vec<usize> = order.iter().copied().filter(|i| edges.keys().any(|(a, _)| a == i)).collect();
    let v2_idx: Vec<usize> = order.iter().copied().filter(|j| edges.keys().any(|(_, b)| b == j)).collect();
    let weights = v1_idx.iter().map(|&i| v2_idx.iter().map(|&j| edges.get(&(i, j)).copied()).collect()).collect();
    Ok(AffinityGraph {
        v1: v1_idx.iter().map(|&i| subs[i].id).collect(),
        v2: v2_idx.iter().map(|&j| subs[j].id).collect(),
        weights,
        nodes: order.iter().map(|&i| subs[i].id).collect(),
        tau,
    })
}

/// Graph over one window of sub-trajectories scored by `bundle`.
pub fn build_graph<T: Real>(subs: &[SubTrajectory<T>], bundle: &ModelBundle<T>, tau: T) -> Result<AffinityGraph<T>> {
    let sigs = subs.iter().map(|s| bundle.signature(s)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SubTrajectory<T>> = subs.iter().collect();
    let all = vec![true; subs.len()];
    build_graph_signed(&refs, &sigs, &all, &all, bundle, tau)
}

pub(crate) fn build_graph_signed<T: Real>(
    subs: &[&SubTrajectory<T>],
    sigs: &[Signature<T>],
    can_precede: &[bool],
    can_follow: &[bool],
    bundle: &ModelBundle<T>,
    tau: T,
) -> Result<AffinityGraph<T>> {
    build_graph_with(subs, can_precede, can_follow, tau, |i, j| bundle.affinity(subs[i], &sigs[i], subs[j], &sigs[j]))
}

/// Selected pairs of one matching window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MatchResult<T> {
    pub window_id: u64,
    /// `(predecessor, successor, affinity)` sorted by predecessor.
    pub pairs: Vec<(SubTrajectoryId, SubTrajectoryId, T)>,
    /// Sub-trajectories without a successor, sorted.
    pub terminals: Vec<SubTrajectoryId>,
    /// Maximal chains, each in temporal order, sorted by first element.
    #[serde(skip)]
    pub sequences: Vec<Vec<SubTrajectoryId>>,
}

/// Chains formed by `pairs` over `nodes`; unpaired nodes are singleton chains.
pub fn assemble_sequences<T>(
    nodes: &[SubTrajectoryId],
    pairs: &[(SubTrajectoryId, SubTrajectoryId, T)],
) -> Vec<Vec<SubTrajectoryId>> {
    let next: BTreeMap<SubTrajectoryId, SubTrajectoryId> = pairs.iter().map(|(u, v, _)| (*u, *v)).collect();
    let has_prev: BTreeSet<SubTrajectoryId> = pairs.iter().map(|(_, v, _)| *v).collect();
    let mut all: BTreeSet<SubTrajectoryId> = nodes.iter().copied().collect();
    all.extend(next.keys());
    all.extend(next.values());
    let mut out = Vec::new();
    for &head in all.iter().filter(|id| !has_prev.contains(id)) {
        let mut chain = vec![head];
        let mut cur = head;
        while let Some(&n) = next.get(&cur) {
            chain.push(n);
            cur = n;
        }
        out.push(chain);
    }
    out
}

/// Maximum-weight matching with a per-node "no successor / no predecessor" option.
///
/// The square problem has `|V1| + |V2|` rows and columns: real rows against
/// real columns carry the edge weights, every entry involving a dummy carries
/// `tau`. A real pair is therefore chosen only when it beats leaving both
/// ends unmatched, and pairs with weight not above `tau` are demoted.
pub fn solve_matching<T: Real>(g: &AffinityGraph<T>) -> MatchResult<T> {
    let (n1, n2) = (g.v1.len(), g.v2.len());
    let n = n1 + n2;
    let forbidden = T::of_usize(n + 2);
    let cost = Array2::from_shape_fn((n, n), |(r, c)| {
        if r < n1 && c < n2 {
            g.weights[r][c].map_or(forbidden, |w| T::one() - w)
        } else {
            T::one() - g.tau
        }
    });
    let assignment = min_cost_assignment(&cost, n1);
    let mut pairs = Vec::new();
    for (r, &c) in assignment.iter().enumerate().take(n1) {
        if c < n2 {
            if let Some(w) = g.weights[r][c] {
                if w > g.tau {
                    pairs.push((g.v1[r], g.v2[c], w));
                }
            }
        }
    }
    pairs.sort_by_key(|p| p.0);
    let with_successor: BTreeSet<SubTrajectoryId> = pairs.iter().map(|p| p.0).collect();
    let terminals = g.nodes.iter().copied().filter(|id| !with_successor.contains(id)).collect();
    let sequences = assemble_sequences(&g.nodes, &pairs);
    MatchResult { window_id: 0, pairs, terminals, sequences }
}

/// Sum of pair affinities.
pub fn total_affinity<T: Real>(result: &MatchResult<T>) -> T {
    result.pairs.iter().fold(T::zero(), |acc, p| acc + p.2)
}

/// Greedy matching by descending weight, used as a baseline.
pub fn greedy_matching<T: Real>(g: &AffinityGraph<T>) -> MatchResult<T> {
    let mut edges = g.edges();
    edges.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal).then((a.0, a.1).cmp(&(b.0, b.1))));
    let (mut used_u, mut used_v) = (BTreeSet::new(), BTreeSet::new());
    let mut pairs = Vec::new();
    for (u, v, w) in edges {
        if w > g.tau && !used_u.contains(&u) && !used_v.contains(&v) {
            used_u.insert(u);
            used_v.insert(v);
            pairs.push((u, v, w));
        }
    }
    pairs.sort_by_key(|p| p.0);
    let terminals = g.nodes.iter().copied().filter(|id| !used_u.contains(id)).collect();
    let sequences = assemble_sequences(&g.nodes, &pairs);
    MatchResult { window_id: 0, pairs, terminals, sequences }
}
