// SPDX-License-Identifier: Apache-2.0

//! Pair-level precision/recall, affinity histograms and ROC AUC.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::MatchResult;
use crate::tracker::SubTrajectory;

/// One `{person_id, sub_trajectory_id}` record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub person_id: u32,
    pub sub_trajectory_id: u64,
}

/// Which sub-trajectory follows which, for each person.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    /// Every id the evaluation may see, labelled or not.
    pub known: BTreeSet<u64>,
    pub pairs: BTreeSet<(u64, u64)>,
}

impl GroundTruth {
    /// Consecutive sub-trajectories of the same person form the truth pairs.
    pub fn from_labels(subs: &[SubTrajectory<f64>], labels: &BTreeMap<u64, Option<u32>>) -> Self {
        let records: Vec<TruthRecord> = subs
            .iter()
            .filter_map(|s| {
                labels.get(&s.id).copied().flatten().map(|p| TruthRecord { person_id: p, sub_trajectory_id: s.id })
            })
            .collect();
        Self::from_records(subs, &records)
    }

    pub fn from_records(subs: &[SubTrajectory<f64>], records: &[TruthRecord]) -> Self {
        let by_id: BTreeMap<u64, &SubTrajectory<f64>> = subs.iter().map(|s| (s.id, s)).collect();
        let mut per_person: BTreeMap<u32, Vec<&SubTrajectory<f64>>> = BTreeMap::new();
        for r in records {
            if let Some(s) = by_id.get(&r.sub_trajectory_id) {
                per_person.entry(r.person_id).or_default().push(s);
            }
        }
        let mut pairs = BTreeSet::new();
        for list in per_person.values_mut() {
            list.sort_by(|a, b| a.t_start.total_cmp(&b.t_start).then(a.id.cmp(&b.id)));
            for w in list.windows(2) {
                if w[0].t_end < w[1].t_start {
                    pairs.insert((w[0].id, w[1].id));
                }
            }
        }
        Self { known: by_id.keys().copied().collect(), pairs }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub actual: usize,
}

impl PairScores {
    pub fn from_counts(tp: usize, predicted: usize, actual: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(tp, predicted), ratio(tp, actual));
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Self { precision: p, recall: r, f_measure: f, true_positives: tp, predicted, actual }
    }
}

/// Counts of matched pairs by affinity, split by correctness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinityHistogram {
    /// Lower bin edges over `[0, 1]`.
    pub edges: Vec<f64>,
    pub correct: Vec<usize>,
    pub wrong: Vec<usize>,
}

impl AffinityHistogram {
    pub fn new(bins: usize) -> Self {
        let bins = bins.max(1);
        Self {
            edges: (0..bins).map(|i| i as f64 / bins as f64).collect(),
            correct: vec![0; bins],
            wrong: vec![0; bins],
        }
    }

    pub fn add(&mut self, w: f64, correct: bool) {
        let n = self.edges.len();
        let k = ((w.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1);
        if correct {
            self.correct[k] += 1;
        } else {
            self.wrong[k] += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.correct.iter().sum::<usize>() + self.wrong.iter().sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tag: String,
    #[serde(flatten)]
    pub scores: PairScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<AffinityHistogram>,
}

impl EvalReport {
    pub fn f_measure(&self) -> f64 {
        self.scores.f_measure
    }
}

fn predicted_pairs(pred: &[MatchResult<f64>], truth: &GroundTruth) -> Result<Vec<(u64, u64, f64)>> {
    let mut out = Vec::new();
    for r in pred {
        for &(u, v, w) in &r.pairs {
            for id in [u, v] {
                if !truth.known.contains(&id) {
                    return Err(Error::UnknownId(id));
                }
            }
            out.push((u, v, w));
        }
        if let Some(&t) = r.terminals.iter().find(|t| !truth.known.contains(t)) {
            return Err(Error::UnknownId(t));
        }
    }
    out.sort_by_key(|a| (a.0, a.1));
    out.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    Ok(out)
}

/// Pair-level scores of predicted matches; terminals do not count.
pub fn evaluate(pred: &[MatchResult<f64>], truth: &GroundTruth) -> Result<PairScores> {
    let pairs = predicted_pairs(pred, truth)?;
    let tp = pairs.iter().filter(|p| truth.pairs.contains(&(p.0, p.1))).count();
    Ok(PairScores::from_counts(tp, pairs.len(), truth.pairs.len()))
}

/// Full report with an affinity histogram of the matched pairs.
pub fn evaluate_report(tag: &str, pred: &[MatchResult<f64>], truth: &GroundTruth, bins: usize) -> Result<EvalReport> {
    let pairs = predicted_pairs(pred, truth)?;
    let mut hist = AffinityHistogram::new(bins);
    for &(u, v, w) in &pairs {
        hist.add(w, truth.pairs.contains(&(u, v)));
    }
    Ok(EvalReport { tag: tag.to_string(), scores: evaluate(pred, truth)?, auc: None, histogram: Some(hist) })
}

/// Area under the ROC curve by the rank-sum statistic; ties count one half.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut all: Vec<(f64, bool)> =
        positives.iter().map(|&s| (s, true)).chain(negatives.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}
