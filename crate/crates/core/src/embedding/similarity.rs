// SPDX-License-Identifier: Apache-2.0

//! Segment similarities in `[0, 1]`: embedding cosine and body height.

use ndarray::{Array1, ArrayView1};

use super::EmbeddingNet;
use crate::error::{Error, Result};
use crate::features::{fisher_vector, GmmGrid};
use crate::geometry::{HumanSegment, Point3};
use crate::scalar::{cmp_real, Real};

pub fn cosine<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    a.dot(&b) / (na * nb)
}

/// `max(0, margin - cos(a, p) + cos(a, n))` for unit vectors.
pub fn triplet_loss<T: Real>(a: ArrayView1<'_, T>, p: ArrayView1<'_, T>, n: ArrayView1<'_, T>, margin: T) -> T {
    (margin - a.dot(&p) + a.dot(&n)).max(T::zero())
}

/// Maps a cosine into `[0, 1]`.
pub fn similarity_from_cosine<T: Real>(cos: T) -> T {
    ((cos + T::one()) / T::lit(2.0)).max(T::zero()).min(T::one())
}

/// Embedding similarity of two segments.
pub fn p1_similarity<T: Real>(
    h_i: &HumanSegment<T>,
    h_j: &HumanSegment<T>,
    grid: &GmmGrid<T>,
    net: &EmbeddingNet<T>,
) -> Result<T> {
    let a = net.embed(&fisher_vector(h_i, grid)?)?;
    let b = net.embed(&fisher_vector(h_j, grid)?)?;
    Ok(similarity_from_cosine(a.dot(&b)))
}

/// Normalized mean of unit embeddings; insensitive to their order.
pub fn mean_embedding<T: Real>(embeddings: &[Array1<T>]) -> Result<Array1<T>> {
    let first = embeddings.first().ok_or(Error::EmptySegment)?;
    let mut sorted: Vec<&Array1<T>> = embeddings.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter().zip(b.iter()).map(|(x, y)| cmp_real(x, y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut sum = Array1::<T>::zeros(first.len());
    for e in sorted {
        sum = sum + e;
    }
    let norm = sum.dot(&sum).sqrt();
    if !(norm > T::lit(1e-12)) {
        return Err(Error::DegenerateNorm);
    }
    Ok(sum / norm)
}

/// Embedding of a whole sub-trajectory from its kept segments.
pub fn track_embedding<T: Real>(
    segments: &[HumanSegment<T>],
    grid: &GmmGrid<T>,
    net: &EmbeddingNet<T>,
) -> Result<Array1<T>> {
    let embeddings = segments.iter().map(|s| net.embed(&fisher_vector(s, grid)?)).collect::<Result<Vec<_>>>()?;
    mean_embedding(&embeddings)
}

/// Linear-interpolated percentile (`q` in `[0, 1]`) of unsorted values.
pub fn percentile<T: Real>(values: &[T], q: T) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(cmp_real);
    let pos = q * T::of_usize(v.len() - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(v.len() - 1);
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - T::of_usize(lo);
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// Robust height of a segment: 95th percentile of its z values.
pub fn segment_height<T: Real>(points: &[Point3<T>]) -> Option<T> {
    let z: Vec<T> = points.iter().map(|p| p.z).collect();
    percentile(&z, T::lit(0.95))
}

/// Median of per-segment heights of a sub-trajectory.
pub fn track_height<T: Real>(segments: &[HumanSegment<T>]) -> Option<T> {
    let heights: Vec<T> = segments.iter().filter_map(|s| segment_height(&s.points)).collect();
    percentile(&heights, T::lit(0.5))
}

/// Gaussian kernel on the height difference.
pub fn height_similarity<T: Real>(h_i: T, h_j: T, sigma_h: T) -> T {
    let d = h_i - h_j;
    (-(d * d) / (T::lit(2.0) * sigma_h * sigma_h)).exp()
}

pub fn p1_height<T: Real>(h_i: &HumanSegment<T>, h_j: &HumanSegment<T>, sigma_h: T) -> T {
    match (segment_height(&h_i.points), segment_height(&h_j.points)) {
        (Some(a), Some(b)) => height_similarity(a, b, sigma_h),
        _ => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
        let v: Array1<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.dot(&v).sqrt();
        v / n
    }

    #[test]
    fn loss_examples() {
        let a = arr1(&[1.0f64, 0.0]);
        let n = arr1(&[-1.0, 0.0]);
        assert_eq!(triplet_loss(a.view(), a.view(), n.view(), 0.2), 0.0);
        assert!((triplet_loss(a.view(), a.view(), a.view(), 0.2) - 0.2).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (a, p, n) = (unit(&mut rng, 8), unit(&mut rng, 8), unit(&mut rng, 8));
            let direct =
                (0.2 - (0..8).map(|i| a[i] * p[i]).sum::<f64>() + (0..8).map(|i| a[i] * n[i]).sum::<f64>()).max(0.0);
            assert!((triplet_loss(a.view(), p.view(), n.view(), 0.2) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_range_points() {
        assert_eq!(similarity_from_cosine(1.0), 1.0);
        assert_eq!(similarity_from_cosine(-1.0), 0.0);
        assert_eq!(similarity_from_cosine(0.0), 0.5);
    }

    #[test]
    fn mean_embedding_is_order_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let es: Vec<_> = (0..7).map(|_| unit(&mut rng, 5)).collect();
        let mut rev = es.clone();
        rev.reverse();
        let m = mean_embedding(&es).unwrap();
        assert_eq!(m, mean_embedding(&rev).unwrap());
        assert!((m.dot(&m) - 1.0).abs() < 1e-12);
        let opposite = vec![arr1(&[1.0, 0.0]), arr1(&[-1.0, 0.0])];
        assert!(matches!(mean_embedding(&opposite), Err(Error::DegenerateNorm)));
    }

    #[test]
    fn height_kernel() {
        assert_eq!(height_similarity(1.7, 1.7, 0.05), 1.0);
        assert!((height_similarity(1.75, 1.70, 0.05) - (-0.5f64).exp()).abs() < 1e-12);
        assert!(height_similarity(1.0, 2.0, 0.05) < 1e-80);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), Some(3.0));
        assert_eq!(percentile(&v, 0.95), Some(4.8));
        assert_eq!(percentile::<f64>(&[], 0.5), None);
        let pts: Vec<_> = (0..=100).map(|i| Point3::new(0.0, 0.0, i as f64 / 100.0)).collect();
        assert!((segment_height(&pts).unwrap() - 0.95).abs() < 1e-12);
    }
}
