// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::GateId;
use crate::scalar::Real;

/// Gate-to-gate transition counts. Row = gate a person left through,
/// column = gate the next sub-trajectory started at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TransitionMatrix<T> {
    counts: Vec<Vec<T>>,
}

impl<T: Real> TransitionMatrix<T> {
    /// Every entry set to the same pseudo-count: no prior knowledge.
    pub fn uniform(gates: usize, pseudo_count: T) -> Self {
        Self { counts: vec![vec![pseudo_count; gates]; gates] }
    }

    pub fn from_counts(counts: Vec<Vec<T>>) -> Self {
        let g = counts.len();
        assert!(counts.iter().all(|r| r.len() == g), "transition matrix must be square");
        assert!(counts.iter().flatten().all(|c| *c >= T::zero()), "transition counts must be non-negative");
        Self { counts }
    }

    pub fn gates(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, from: GateId, to: GateId) -> T {
        self.counts[from as usize][to as usize]
    }

    pub fn counts(&self) -> &[Vec<T>] {
        &self.counts
    }

    pub fn column_sum(&self, to: GateId) -> T {
        self.counts.iter().map(|row| row[to as usize]).sum()
    }

    /// Share of arrivals at `to` that came from `from`; `1/G` when a gate is
    /// unknown, out of range, or the column is empty.
    pub fn p2(&self, from: Option<GateId>, to: Option<GateId>) -> T {
        let g = self.gates();
        if g == 0 {
            return T::one();
        }
        let uniform = T::one() / T::of_usize(g);
        match (from, to) {
            (Some(f), Some(t)) if (f as usize) < g && (t as usize) < g => {
                let total = self.column_sum(t);
                if total > T::zero() {
                    self.count(f, t) / total
                } else {
                    uniform
                }
            }
            _ => uniform,
        }
    }

    /// Adds one count per observed transition; `self` is left untouched.
    pub fn update_spatial(&self, samples: &[(GateId, GateId)]) -> Self {
        let mut next = self.clone();
        for &(f, t) in samples {
            if let Some(cell) = next.counts.get_mut(f as usize).and_then(|row| row.get_mut(t as usize)) {
                *cell = *cell + T::one();
            }
        }
        next
    }
}
