// SPDX-License-Identifier: Apache-2.0

//! Pairwise affinity: appearance x spatial transition x travel time.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::embedding::{height_similarity, similarity_from_cosine, track_embedding, track_height, EmbeddingNet};
use crate::error::{Error, Result};
use crate::features::GmmGrid;
use crate::scalar::Real;
use crate::spatiotemporal::{TransitionMatrix, TravelTimeModel};
use crate::tracker::{temporal_precedes, SubTrajectory};

/// Which appearance similarity feeds the first factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum P1Mode {
    /// Fisher Vector embedding cosine.
    #[default]
    Fv,
    /// Body-height kernel, for sparse sensors.
    Height,
}

/// Factors switched off contribute 1 to the product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factors {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
}

impl Default for Factors {
    fn default() -> Self {
        Self { p1: true, p2: true, p3: true }
    }
}

impl Factors {
    pub const ALL: Self = Self { p1: true, p2: true, p3: true };
    pub const P1: Self = Self { p1: true, p2: false, p3: false };
    pub const P2: Self = Self { p1: false, p2: true, p3: false };
    pub const P3: Self = Self { p1: false, p2: false, p3: true };
}

/// Per-sub-trajectory appearance summary, computed once per graph.
#[derive(Clone, Debug, PartialEq)]
pub enum Signature<T> {
    Embedding(Array1<T>),
    Height(T),
    /// No usable segments.
    Missing,
}

/// Everything needed to score a candidate pair.
#[derive(Clone, Debug)]
pub struct ModelBundle<T> {
    pub grid: GmmGrid<T>,
    pub net: Option<EmbeddingNet<T>>,
    pub transitions: TransitionMatrix<T>,
    pub travel: TravelTimeModel<T>,
    pub p1_mode: P1Mode,
    pub sigma_h: T,
    pub factors: Factors,
}

/// Product of the three factors.
pub fn affinity_product<T: Real>(p1: T, p2: T, p3: T) -> T {
    p1 * p2 * p3
}

impl<T: Real> ModelBundle<T> {
    /// Appearance summary of `tr` under the configured P1 variant.
    pub fn signature(&self, tr: &SubTrajectory<T>) -> Result<Signature<T>> {
        if !self.factors.p1 || tr.segments.is_empty() {
            return Ok(Signature::Missing);
        }
        match self.p1_mode {
            P1Mode::Fv => {
                let net = self
                    .net
                    .as_ref()
                    .ok_or_else(|| Error::MissingModel("embedding network required for fv similarity".into()))?;
                match track_embedding(&tr.segments, &self.grid, net) {
                    Ok(e) => Ok(Signature::Embedding(e)),
                    Err(Error::DegenerateNorm) => Ok(Signature::Missing),
                    Err(e) => Err(e),
                }
            }
            P1Mode::Height => Ok(track_height(&tr.segments).map_or(Signature::Missing, Signature::Height)),
        }
    }

    /// Appearance factor; a missing signature scores as an orthogonal embedding would.
    pub fn p1(&self, a: &Signature<T>, b: &Signature<T>) -> T {
        if !self.factors.p1 {
            return T::one();
        }
        match (a, b) {
            (Signature::Embedding(x), Signature::Embedding(y)) => similarity_from_cosine(x.dot(y)),
            (Signature::Height(x), Signature::Height(y)) => height_similarity(*x, *y, self.sigma_h),
            _ => T::lit(0.5),
        }
    }

    /// `[P1, P2, P3]` for `u` followed by `v`.
    pub fn factors_of(
        &self,
        u: &SubTrajectory<T>,
        su: &Signature<T>,
        v: &SubTrajectory<T>,
        sv: &Signature<T>,
    ) -> Result<[T; 3]> {
        if !temporal_precedes(u, v) {
            return Err(Error::NonCausalPair(u.id, v.id));
        }
        let p1 = self.p1(su, sv);
        let p2 = if self.factors.p2 { self.transitions.p2(u.end_gate, v.start_gate) } else { T::one() };
        let p3 = if self.factors.p3 {
            let pair = u.end_gate.zip(v.start_gate);
            self.travel.p3(v.t_start - u.t_end, pair)?
        } else {
            T::one()
        };
        Ok([p1, p2, p3])
    }

    pub fn affinity(
        &self,
        u: &SubTrajectory<T>,
        su: &Signature<T>,
        v: &SubTrajectory<T>,
        sv: &Signature<T>,
    ) -> Result<T> {
        let [p1, p2, p3] = self.factors_of(u, su, v, sv)?;
        Ok(affinity_product(p1, p2, p3))
    }

    /// Convenience form computing both signatures.
    pub fn affinity_of(&self, u: &SubTrajectory<T>, v: &SubTrajectory<T>) -> Result<T> {
        self.affinity(u, &self.signature(u)?, v, &self.signature(v)?)
    }

    pub fn with_factors(&self, factors: Factors) -> Self {
        Self { factors, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatiotemporal::TravelParams;

    fn tr(id: u64, t0: f64, t1: f64, g0: Option<u32>, g1: Option<u32>) -> SubTrajectory<f64> {
        SubTrajectory {
            id,
            sensor_id: 0,
            t_start: t0,
            t_end: t1,
            start_gate: g0,
            end_gate: g1,
            samples: vec![[t0, 0.0, 0.0], [t1, 1.0, 0.0]],
            segments: vec![],
        }
    }

    fn bundle() -> ModelBundle<f64> {
        ModelBundle {
            grid: GmmGrid::default(),
            net: None,
            transitions: TransitionMatrix::uniform(4, 1.0),
            travel: TravelTimeModel::uniform(TravelParams::default()),
            p1_mode: P1Mode::Height,
            sigma_h: 0.05,
            factors: Factors::ALL,
        }
    }

    #[test]
    fn product_examples() {
        assert_eq!(affinity_product(1.0, 1.0, 1.0), 1.0);
        assert_eq!(affinity_product(0.0, 0.7, 0.9), 0.0);
        assert!((affinity_product(0.8f64, 0.25, 0.5) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn uniform_model_scores_one_over_g() {
        let b = bundle();
        let a = b.affinity(
            &tr(1, 0.0, 2.0, None, Some(1)),
            &Signature::Height(1.7),
            &tr(2, 3.0, 5.0, Some(2), None),
            &Signature::Height(1.7),
        );
        assert!((a.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_causal_pair_is_an_error() {
        let b = bundle();
        let err = b.affinity_of(&tr(1, 0.0, 4.0, None, None), &tr(2, 3.0, 5.0, None, None)).unwrap_err();
        assert!(matches!(err, Error::NonCausalPair(1, 2)));
    }

    #[test]
    fn disabled_factors_are_neutral() {
        let b = bundle().with_factors(Factors::P3);
        let a = b.affinity(
            &tr(1, 0.0, 2.0, None, None),
            &Signature::Height(1.0),
            &tr(2, 3.0, 5.0, None, None),
            &Signature::Height(2.0),
        );
        assert_eq!(a.unwrap(), 1.0);
    }

    #[test]
    fn fv_mode_requires_a_network() {
        let mut b = bundle();
        b.p1_mode = P1Mode::Fv;
        let mut t = tr(1, 0.0, 1.0, None, None);
        t.segments.push(
            crate::geometry::HumanSegment::new(0, 0.5, vec![crate::geometry::Point3::new(0.0, 0.0, 1.0)]).unwrap(),
        );
        assert!(matches!(b.signature(&t), Err(Error::MissingModel(_))));
    }
}
