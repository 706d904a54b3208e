// SPDX-License-Identifier: Apache-2.0

//! Triplet-loss training of the embedding network.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{EmbeddingNet, Gradient, Layer};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub margin: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128],
            embedding_dim: 64,
            margin: 0.2,
            batch_size: 64,
            epochs: 50,
            learning_rate: 1e-3,
            lr_decay: 0.5,
            decay_every: 20,
            seed: 0,
        }
    }
}

/// Flattened feature matrices with person labels.
#[derive(Clone, Debug)]
pub struct TrainingSet<T> {
    pub x: Array2<T>,
    pub labels: Vec<u64>,
}

impl<T: Real> TrainingSet<T> {
    pub fn from_features(samples: &[(u64, FeatureMatrix<T>)]) -> Result<Self> {
        let dim = samples.first().map(|(_, f)| f.len()).ok_or(Error::InsufficientClasses)?;
        let mut x = Array2::zeros((samples.len(), dim));
        for (mut row, (_, f)) in x.rows_mut().into_iter().zip(samples) {
            if f.len() != dim {
                return Err(Error::Invalid("feature matrices differ in size".into()));
            }
            row.iter_mut().zip(f.iter()).for_each(|(r, v)| *r = *v);
        }
        Ok(Self { x, labels: samples.iter().map(|(l, _)| *l).collect() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Requires two persons with at least two samples each.
    pub fn check(&self) -> Result<()> {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(*l).or_default() += 1;
        }
        if counts.values().filter(|&&c| c >= 2).count() < 2 {
            return Err(Error::InsufficientClasses);
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self { x: self.x.select(Axis(0), idx), labels: idx.iter().map(|&i| self.labels[i]).collect() }
    }
}

/// `(anchor, positive, negative)` row indices into one batch.
pub type Triplet = (usize, usize, usize);

/// For each anchor with an in-batch positive, draws one positive and one negative.
pub fn sample_triplets<R: Rng + ?Sized>(labels: &[u64], rng: &mut R) -> Vec<Triplet> {
    let mut out = Vec::new();
    for (a, la) in labels.iter().enumerate() {
        let pos: Vec<usize> = (0..labels.len()).filter(|&j| j != a && labels[j] == *la).collect();
        let neg: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] != *la).collect();
        if let (Some(&p), Some(&n)) = (pos.choose(rng), neg.choose(rng)) {
            out.push((a, p, n));
        }
    }
    out
}

/// Mean triplet loss over `triplets` and its gradient w.r.t. all parameters.
pub fn batch_loss_and_gradient<T: Real>(
    net: &EmbeddingNet<T>,
    x: &Array2<T>,
    triplets: &[Triplet],
    margin: T,
) -> Result<(T, Gradient<T>)> {
    let fwd = net.forward(x.view())?;
    let e = &fwd.embeddings;
    let mut d_emb = Array2::<T>::zeros(e.raw_dim());
    let mut total = T::zero();
    let scale = T::one() / T::of_usize(triplets.len().max(1));
    for &(a, p, n) in triplets {
        let (ea, ep, en) = (e.row(a), e.row(p), e.row(n));
        let loss = margin - ea.dot(&ep) + ea.dot(&en);
        if loss > T::zero() {
            total = total + loss;
            let diff = &en - &ep;
            d_emb.row_mut(a).scaled_add(scale, &diff);
            d_emb.row_mut(p).scaled_add(-scale, &ea);
            d_emb.row_mut(n).scaled_add(scale, &ea);
        }
    }
    Ok((total * scale, net.backward(&fwd, &d_emb)))
}

/// Mean triplet loss without gradients.
pub fn batch_loss<T: Real>(net: &EmbeddingNet<T>, x: &Array2<T>, triplets: &[Triplet], margin: T) -> Result<T> {
    let e = net.forward(x.view())?.embeddings;
    let total = triplets.iter().fold(T::zero(), |acc, &(a, p, n)| {
        acc + (margin - e.row(a).dot(&e.row(p)) + e.row(a).dot(&e.row(n))).max(T::zero())
    });
    Ok(total / T::of_usize(triplets.len().max(1)))
}

struct Adam<T> {
    m: Vec<Layer<T>>,
    v: Vec<Layer<T>>,
    step: i32,
}

impl<T: Real> Adam<T> {
    fn new(net: &EmbeddingNet<T>) -> Self {
        let zeros =
            |l: &Layer<T>| Layer { weights: Array2::zeros(l.weights.raw_dim()), bias: Array1::zeros(l.bias.len()) };
        Self { m: net.layers().iter().map(zeros).collect(), v: net.layers().iter().map(zeros).collect(), step: 0 }
    }

    fn apply(&mut self, net: &mut EmbeddingNet<T>, grad: &Gradient<T>, lr: T) {
        let (b1, b2, eps) = (T::lit(0.9), T::lit(0.999), T::lit(1e-8));
        self.step += 1;
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in net.layers_mut().iter_mut().zip(&grad.layers).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean triplet loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// Trains a fresh network on `data`; fully determined by `config.seed`.
pub fn train<T: Real>(data: &TrainingSet<T>, config: &TrainConfig) -> Result<(EmbeddingNet<T>, TrainReport)> {
    data.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sizes: Vec<usize> = std::iter::once(data.x.ncols())
        .chain(config.hidden.iter().copied())
        .chain(std::iter::once(config.embedding_dim))
        .collect();
    let mut net = EmbeddingNet::new(&sizes, &mut rng);
    net.fit_input_standardization(data.x.view());
    let mut adam = Adam::new(&net);
    let margin = T::lit(config.margin);
    let batch = config.batch_size.max(3);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate * config.lr_decay.powi((epoch / config.decay_every.max(1)) as i32);
        order.shuffle(&mut rng);
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            let labels: Vec<u64> = chunk.iter().map(|&i| data.labels[i]).collect();
            let triplets = sample_triplets(&labels, &mut rng);
            if triplets.is_empty() {
                continue;
            }
            let x = data.x.select(Axis(0), chunk);
            let (loss, grad) = batch_loss_and_gradient(&net, &x, &triplets, margin)?;
            adam.apply(&mut net, &grad, T::lit(lr));
            sum += loss.f64();
            batches += 1;
        }
        epoch_losses.push(if batches > 0 { sum / batches as f64 } else { 0.0 });
    }
    if !net.is_finite() {
        return Err(Error::Invalid("training diverged".into()));
    }
    let final_loss = epoch_losses.last().copied().unwrap_or(0.0);
    Ok((net, TrainReport { epoch_losses, final_loss }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn toy_set(seed: u64, per_class: usize, dim: usize) -> TrainingSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| noise.sample(&mut rng)).collect()).collect();
        let mut x = Array2::zeros((3 * per_class, dim));
        let mut labels = Vec::new();
        for c in 0..3 {
            for k in 0..per_class {
                let r = c * per_class + k;
                for j in 0..dim {
                    x[[r, j]] = centers[c][j] + 0.8 * noise.sample(&mut rng);
                }
                labels.push(c as u64);
            }
        }
        TrainingSet { x, labels }
    }

    #[test]
    fn insufficient_classes() {
        let set = TrainingSet { x: Array2::<f64>::zeros((3, 4)), labels: vec![1, 1, 2] };
        assert!(matches!(train(&set, &TrainConfig::default()), Err(Error::InsufficientClasses)));
    }

    #[test]
    fn small_step_does_not_increase_batch_loss() {
        let data = toy_set(3, 10, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = EmbeddingNet::new(&[16, 12, 6], &mut rng);
        let triplets = sample_triplets(&data.labels, &mut rng);
        let (before, grad) = batch_loss_and_gradient(&net, &data.x, &triplets, 0.2).unwrap();
        net.apply_gradient(&grad, 1e-5);
        let after = batch_loss(&net, &data.x, &triplets, 0.2).unwrap();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn training_is_reproducible_and_reduces_loss() {
        let data = toy_set(4, 20, 16);
        let config =
            TrainConfig { hidden: vec![16], embedding_dim: 8, epochs: 15, batch_size: 16, ..TrainConfig::default() };
        let (a, ra) = train(&data, &config).unwrap();
        let (b, _) = train(&data, &config).unwrap();
        assert_eq!(a.params(), b.params());
        assert!(ra.final_loss < ra.epoch_losses[0]);
    }

    #[test]
    fn triplets_respect_labels() {
        let labels = [1, 1, 2, 3, 3, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = sample_triplets(&labels, &mut rng);
        assert_eq!(t.len(), 5);
        for (a, p, n) in t {
            assert!(a != p && labels[a] == labels[p] && labels[a] != labels[n]);
        }
    }
}
