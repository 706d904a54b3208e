// SPDX-License-Identifier: Apache-2.0

//! Text snapshot of the learned transition counts and travel-time posteriors.

use serde::{Deserialize, Serialize};

use super::{GateId, PairState, TransitionMatrix, TravelDensity, TravelParams, TravelTimeModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PairRecord<T> {
    pub from: GateId,
    pub to: GateId,
    /// Most likely travel time; absent while the pair is still uniform.
    pub mode: Option<T>,
    pub a: T,
    pub b: T,
    pub mu_tt: T,
    pub n: usize,
}

/// Everything needed to resume updating where a previous run stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpatiotemporalState<T> {
    pub params: TravelParams<T>,
    pub q_counts: Vec<Vec<T>>,
    pub pairs: Vec<PairRecord<T>>,
}

impl<T: Real> SpatiotemporalState<T> {
    pub fn capture(q: &TransitionMatrix<T>, travel: &TravelTimeModel<T>) -> Self {
        let pairs = travel
            .pairs()
            .map(|(&(from, to), s)| PairRecord {
                from,
                to,
                mode: match travel.density(Some((from, to))) {
                    TravelDensity::InvGamma(ig) => Some(ig.mode()),
                    TravelDensity::Uniform { .. } => None,
                },
                a: s.a,
                b: s.b,
                mu_tt: s.mu_tt,
                n: s.n,
            })
            .collect();
        Self { params: travel.params, q_counts: q.counts().to_vec(), pairs }
    }

    /// Rebuilds both models; `gates` is the gate count of the map in use.
    pub fn restore(&self, gates: usize) -> Result<(TransitionMatrix<T>, TravelTimeModel<T>)> {
        let bad = |m: String| Err(Error::Invalid(format!("spatiotemporal state: {m}")));
        if self.q_counts.len() != gates || self.q_counts.iter().any(|r| r.len() != gates) {
            return bad(format!("transition counts are not {gates}x{gates}"));
        }
        if self.q_counts.iter().flatten().any(|c| !(*c >= T::zero()) || !c.is_finite()) {
            return bad("negative or non-finite transition count".into());
        }
        for p in &self.pairs {
            if p.from as usize >= gates || p.to as usize >= gates {
                return bad(format!("pair ({}, {}) names an unknown gate", p.from, p.to));
            }
            if !(p.a > T::one()) || !(p.b > T::zero()) || !p.mu_tt.is_finite() {
                return bad(format!("pair ({}, {}) has an invalid posterior", p.from, p.to));
            }
        }
        let travel = TravelTimeModel::from_pairs(
            self.params,
            self.pairs.iter().map(|p| ((p.from, p.to), PairState { n: p.n, mu_tt: p.mu_tt, a: p.a, b: p.b })),
        );
        Ok((TransitionMatrix::from_counts(self.q_counts.clone()), travel))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_scores() {
        let q = TransitionMatrix::uniform(4, 1.0).update_spatial(&[(0, 1), (0, 1), (2, 3)]);
        let travel = TravelTimeModel::uniform(TravelParams::default())
            .update_temporal((0, 1), &[4.0, 4.5, 5.0, 4.2, 4.8, 4.4])
            .update_temporal((2, 3), &[9.0]);
        let state = SpatiotemporalState::capture(&q, &travel);
        assert!(state.pairs.iter().find(|p| (p.from, p.to) == (0, 1)).unwrap().mode.is_some());
        assert!(state.pairs.iter().find(|p| (p.from, p.to) == (2, 3)).unwrap().mode.is_none());
        let back = SpatiotemporalState::from_json(&state.to_json()).unwrap();
        let (q2, t2) = back.restore(4).unwrap();
        assert_eq!(q2, q);
        for dt in [1.0, 4.5, 7.0, 30.0] {
            assert_eq!(t2.p3(dt, Some((0, 1))).unwrap(), travel.p3(dt, Some((0, 1))).unwrap());
        }
        assert_eq!(q2.p2(Some(0), Some(1)), q.p2(Some(0), Some(1)));
    }

    #[test]
    fn mismatched_map_is_rejected() {
        let state = SpatiotemporalState::capture(
            &TransitionMatrix::<f64>::uniform(4, 1.0),
            &TravelTimeModel::uniform(TravelParams::default()),
        );
        assert!(matches!(state.restore(8), Err(Error::Invalid(_))));
        let mut broken = state.clone();
        broken.q_counts[1][2] = -1.0;
        assert!(broken.restore(4).is_err());
    }
}
