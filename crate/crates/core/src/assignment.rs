// SPDX-License-Identifier: Apache-2.0

//! Minimum-cost perfect assignment on a square cost matrix (Hungarian
//! method with potentials, O(n³)).

use ndarray::Array2;

use crate::scalar::Real;

/// Solves the square assignment problem and returns `row -> column`.
///
/// Among equal-cost optima the result is pushed toward the lexicographically
/// smallest row-to-column map by pairwise exchanges over the first
/// `tie_rows` rows (pass `n` to normalise every row).
pub fn min_cost_assignment<T: Real>(cost: &Array2<T>, tie_rows: usize) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] = u[col_owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    lexicographic_ties(cost, &mut row_to_col, tie_rows.min(n));
    row_to_col
}

fn lexicographic_ties<T: Real>(cost: &Array2<T>, row_to_col: &mut [usize], rows: usize) {
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..rows {
            for k in (i + 1)..rows {
                let (ci, ck) = (row_to_col[i], row_to_col[k]);
                if ci <= ck {
                    continue;
                }
                let current = cost[[i, ci]] + cost[[k, ck]];
                let swapped = cost[[i, ck]] + cost[[k, ci]];
                if swapped <= current {
                    row_to_col.swap(i, k);
                    changed = true;
                }
            }
        }
    }
}

/// Total cost of an assignment.
pub fn assignment_cost<T: Real>(cost: &Array2<T>, row_to_col: &[usize]) -> T {
    row_to_col.iter().enumerate().fold(T::zero(), |acc, (r, &c)| acc + cost[[r, c]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=6 {
            let perms = permutations(n);
            for _ in 0..30 {
                let cost = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..10.0f64));
                let got = assignment_cost(&cost, &min_cost_assignment(&cost, n));
                let best = perms.iter().map(|p| assignment_cost(&cost, p)).fold(f64::INFINITY, f64::min);
                assert!((got - best).abs() < 1e-9, "n={n} got {got} best {best}");
            }
        }
    }

    #[test]
    fn equal_costs_give_identity() {
        let cost = Array2::from_elem((5, 5), 0.5f64);
        assert_eq!(min_cost_assignment(&cost, 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn works_in_single_precision() {
        let cost = ndarray::arr2(&[[4.0f32, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]);
        let a = min_cost_assignment(&cost, 3);
        assert_eq!(assignment_cost(&cost, &a), 5.0);
    }

    #[test]
    fn empty_matrix() {
        assert!(min_cost_assignment(&Array2::<f64>::zeros((0, 0)), 0).is_empty());
    }
}
