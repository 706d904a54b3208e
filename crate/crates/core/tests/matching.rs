// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;
use trajlink::assignment::{assignment_cost, min_cost_assignment};
use trajlink::matcher::{greedy_matching, solve_matching, total_affinity, AffinityGraph};

fn graph() -> impl Strategy<Value = AffinityGraph<f64>> {
    (0usize..6, 0usize..6, 0u32..16).prop_flat_map(|(n1, n2, tau)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, 0u32..=64), n2), n1).prop_map(
            move |w| {
                let v1: Vec<u64> = (0..n1 as u64).collect();
                let v2: Vec<u64> = (50..50 + n2 as u64).collect();
                AffinityGraph {
                    nodes: v1.iter().chain(&v2).copied().collect(),
                    v1,
                    v2,
                    weights: w
                        .into_iter()
                        .map(|r| r.into_iter().map(|x| x.map(|k| k as f64 / 64.0)).collect())
                        .collect(),
                    tau: tau as f64 / 64.0,
                }
            },
        )
    })
}

fn best(g: &AffinityGraph<f64>, row: usize, used: &mut [bool]) -> f64 {
    if row == g.v1.len() {
        return 0.0;
    }
    let mut b = best(g, row + 1, used);
    for c in 0..g.v2.len() {
        if let (false, Some(w)) = (used[c], g.weights[row][c]) {
            used[c] = true;
            b = b.max(w - g.tau + best(g, row + 1, used));
            used[c] = false;
        }
    }
    b
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #[test]
    fn solver_reaches_exhaustive_optimum(g in graph()) {
        let r = solve_matching(&g);
        let got: f64 = r.pairs.iter().map(|p| p.2 - g.tau).sum();
        prop_assert_eq!(got, best(&g, 0, &mut vec![false; g.v2.len()]));
    }

    #[test]
    fn matching_is_one_to_one_and_beats_greedy(g in graph()) {
        let r = solve_matching(&g);
        let us: BTreeSet<u64> = r.pairs.iter().map(|p| p.0).collect();
        let vs: BTreeSet<u64> = r.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(us.len(), r.pairs.len());
        prop_assert_eq!(vs.len(), r.pairs.len());
        prop_assert!(r.pairs.iter().all(|p| p.2 > g.tau));
        let terminals: BTreeSet<u64> = r.terminals.iter().copied().collect();
        for n in &g.nodes {
            prop_assert_eq!(terminals.contains(n), !us.contains(n));
        }
        let tau = g.tau;
        let objective = |pairs: &[(u64, u64, f64)]| pairs.iter().map(|p| p.2 - tau).sum::<f64>();
        prop_assert!(objective(&r.pairs) >= objective(&greedy_matching(&g).pairs));
        prop_assert!(total_affinity(&r) >= 0.0);
    }

    #[test]
    fn assignment_matches_permutation_search(
        n in 1usize..7,
        seed in prop::collection::vec(0u32..100, 49),
    ) {
        let cost = Array2::from_shape_fn((n, n), |(i, j)| seed[i * 7 + j] as f64);
        let a = min_cost_assignment(&cost, n);
        let mut cols = a.clone();
        cols.sort_unstable();
        prop_assert_eq!(cols, (0..n).collect::<Vec<_>>());
        let brute = permutations(n).iter().map(|p| assignment_cost(&cost, p)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(assignment_cost(&cost, &a), brute);
    }
}
