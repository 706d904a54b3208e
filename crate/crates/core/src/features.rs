// SPDX-License-Identifier: Apache-2.0

//! Fisher Vector signatures of human segments.
//!
//! A segment is encoded against a fixed isotropic GMM whose means sit on a
//! regular grid inside a normalized body box. The per-point normalized
//! gradients with respect to the mixture logits, means and standard
//! deviations are pooled with sum (divided by the point count), max and min,
//! giving a matrix whose size does not depend on the number of points.
//!
//! Row layout (columns are mixture components):
//!
//! | rows    | pooling | gradient          |
//! |---------|---------|-------------------|
//! | 0       | sum / T | logit             |
//! | 1..=3   | sum / T | mean x, y, z      |
//! | 4..=6   | sum / T | std-dev x, y, z   |
//! | 7       | max     | logit             |
//! | 8..=10  | max     | mean x, y, z      |
//! | 11..=13 | max     | std-dev x, y, z   |
//! | 14..=16 | min     | mean x, y, z      |
//! | 17..=19 | min     | std-dev x, y, z   |

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HumanSegment, Point3};
use crate::scalar::Real;

pub const FEATURE_ROWS: usize = 20;

/// 20 x C pooled gradient statistics of one segment.
pub type FeatureMatrix<T> = Array2<T>;

/// Isotropic equal-weight GMM with means on a 3D grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GmmGrid<T> {
    pub means: Vec<[T; 3]>,
    pub sigma: T,
    pub weights: Vec<T>,
    /// World z is divided by this before encoding (metres per body-box unit).
    pub body_height: T,
}

impl<T: Real> Default for GmmGrid<T> {
    fn default() -> Self {
        Self::regular([3, 3, 6], T::lit(0.25), T::lit(2.0))
    }
}

impl<T: Real> GmmGrid<T> {
    /// Cell-centred grid over `[-0.5, 0.5]^2 x [0, 1]`.
    pub fn regular(shape: [usize; 3], sigma: T, body_height: T) -> Self {
        assert!(shape.iter().all(|&n| n > 0), "grid shape must be positive");
        assert!(sigma > T::zero() && body_height > T::zero());
        let centre = |i: usize, n: usize, lo: f64| T::lit(lo + (i as f64 + 0.5) / n as f64);
        let mut means = Vec::with_capacity(shape.iter().product());
        for iz in 0..shape[2] {
            for iy in 0..shape[1] {
                for ix in 0..shape[0] {
                    means.push([centre(ix, shape[0], -0.5), centre(iy, shape[1], -0.5), centre(iz, shape[2], 0.0)]);
                }
            }
        }
        let c = means.len();
        Self { means, sigma, weights: vec![T::one() / T::of_usize(c); c], body_height }
    }

    /// Builds a grid from explicit parameters; weights must be positive and sum to 1.
    pub fn from_parts(means: Vec<[T; 3]>, sigma: T, weights: Vec<T>, body_height: T) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        if means.is_empty()
            || means.len() != weights.len()
            || sigma <= T::zero()
            || body_height <= T::zero()
            || weights.iter().any(|&w| w <= T::zero())
            || (sum - T::one()).abs() > T::lit(1e-6)
        {
            return Err(Error::Invalid("inconsistent mixture parameters".into()));
        }
        Ok(Self { means, sigma, weights, body_height })
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    /// Logits whose softmax gives the weights.
    pub fn alphas(&self) -> Vec<T> {
        self.weights.iter().map(|w| w.ln()).collect()
    }
}

/// Isotropic Gaussian density of component `c` at `p` (D = 3).
pub fn component_likelihood<T: Real>(p: [T; 3], grid: &GmmGrid<T>, c: usize) -> T {
    let s2 = grid.sigma * grid.sigma;
    let d2 = sq_dist(p, grid.means[c]);
    let norm = (T::lit(2.0 * std::f64::consts::PI) * s2).powf(T::lit(1.5));
    (-d2 / (T::lit(2.0) * s2)).exp() / norm
}

fn sq_dist<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    (0..3).fold(T::zero(), |acc, k| acc + (a[k] - b[k]) * (a[k] - b[k]))
}

/// Posterior component probabilities of `p`, computed in log space.
pub fn responsibilities<T: Real>(p: [T; 3], grid: &GmmGrid<T>) -> Vec<T> {
    let mut out = vec![T::zero(); grid.components()];
    responsibilities_into(p, grid, &mut out);
    out
}

fn responsibilities_into<T: Real>(p: [T; 3], grid: &GmmGrid<T>, out: &mut [T]) {
    let inv = T::one() / (T::lit(2.0) * grid.sigma * grid.sigma);
    let mut top = T::neg_infinity();
    for (c, o) in out.iter_mut().enumerate() {
        *o = grid.weights[c].ln() - sq_dist(p, grid.means[c]) * inv;
        top = top.max(*o);
    }
    let mut total = T::zero();
    for o in out.iter_mut() {
        *o = (*o - top).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

/// Maps segment points into the body box: XY centred on the centroid, z scaled.
///
/// Returns distinct points in lexicographic order with their multiplicities,
/// divided by the multiplicities' gcd so a uniformly repeated cloud maps to
/// the same output bit for bit.
pub fn normalize_segment<T: Real>(points: &[Point3<T>], body_height: T) -> Vec<([T; 3], usize)> {
    let mut sorted: Vec<Point3<T>> = points.to_vec();
    sorted.sort_by(|a, b| a.lex_cmp(b));
    let mut unique: Vec<(Point3<T>, usize)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        match unique.last_mut() {
            Some((q, m)) if *q == p => *m += 1,
            _ => unique.push((p, 1)),
        }
    }
    let g = unique.iter().fold(0, |g, u| gcd(g, u.1));
    for u in &mut unique {
        u.1 /= g.max(1);
    }
    let total = T::of_usize(unique.iter().map(|u| u.1).sum());
    let (sx, sy) = unique.iter().fold((T::zero(), T::zero()), |(sx, sy), (p, m)| {
        let m = T::of_usize(*m);
        (sx + m * p.x, sy + m * p.y)
    });
    let (cx, cy) = (sx / total, sy / total);
    unique.into_iter().map(|(p, m)| ([p.x - cx, p.y - cy, p.z / body_height], m)).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Fisher Vector matrix of a segment (see the module docs for the layout).
pub fn fisher_vector<T: Real>(segment: &HumanSegment<T>, grid: &GmmGrid<T>) -> Result<FeatureMatrix<T>> {
    fisher_vector_points(&segment.points, grid)
}

pub fn fisher_vector_points<T: Real>(points: &[Point3<T>], grid: &GmmGrid<T>) -> Result<FeatureMatrix<T>> {
    if points.is_empty() {
        return Err(Error::EmptySegment);
    }
    let c_count = grid.components();
    let normalized = normalize_segment(points, grid.body_height);
    let mut fv = Array2::zeros((FEATURE_ROWS, c_count));
    for c in 0..c_count {
        fv[[7, c]] = T::neg_infinity();
        for r in 8..14 {
            fv[[r, c]] = T::neg_infinity();
        }
        for r in 14..20 {
            fv[[r, c]] = T::infinity();
        }
    }
    let sigma = grid.sigma;
    let inv_sqrt_w: Vec<T> = grid.weights.iter().map(|w| T::one() / w.sqrt()).collect();
    let inv_sqrt_2w: Vec<T> = grid.weights.iter().map(|w| T::one() / (T::lit(2.0) * *w).sqrt()).collect();
    let mut gamma = vec![T::zero(); c_count];
    for (p, mult) in &normalized {
        let m = T::of_usize(*mult);
        responsibilities_into(*p, grid, &mut gamma);
        for c in 0..c_count {
            let g = gamma[c];
            let mu = grid.means[c];
            let d_alpha = (g - grid.weights[c]) * inv_sqrt_w[c];
            fv[[0, c]] = fv[[0, c]] + m * d_alpha;
            fv[[7, c]] = fv[[7, c]].max(d_alpha);
            for k in 0..3 {
                let u = (p[k] - mu[k]) / sigma;
                let d_mu = g * u * inv_sqrt_w[c];
                let d_sigma = g * (u * u - T::one()) * inv_sqrt_2w[c];
                fv[[1 + k, c]] = fv[[1 + k, c]] + m * d_mu;
                fv[[4 + k, c]] = fv[[4 + k, c]] + m * d_sigma;
                fv[[8 + k, c]] = fv[[8 + k, c]].max(d_mu);
                fv[[11 + k, c]] = fv[[11 + k, c]].max(d_sigma);
                fv[[14 + k, c]] = fv[[14 + k, c]].min(d_mu);
                fv[[17 + k, c]] = fv[[17 + k, c]].min(d_sigma);
            }
        }
    }
    let total = T::of_usize(normalized.iter().map(|u| u.1).sum());
    for r in 0..7 {
        for c in 0..c_count {
            fv[[r, c]] = fv[[r, c]] / total;
        }
    }
    Ok(fv)
}
