// SPDX-License-Identifier: Apache-2.0

//! Windowed matching over a stream of sub-trajectories ordered by end time.

use serde::{Deserialize, Serialize};

use super::affinity::{ModelBundle, Signature};
use super::graph::{assemble_sequences, build_graph_signed, solve_matching, MatchResult};
use crate::error::Result;
use crate::scalar::Real;
use crate::tracker::SubTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct WindowConfig<T> {
    /// Solve after this many new arrivals.
    pub count: usize,
    /// Solve when this much stream time passed since the previous solve.
    pub expiry: T,
    /// A sub-trajectory is offered as a predecessor only after this much
    /// stream time has passed since it ended, so its successor can arrive.
    pub settle: T,
    /// Open successor slots older than this are closed as terminals.
    pub max_wait: T,
}

impl<T: Real> Default for WindowConfig<T> {
    fn default() -> Self {
        Self { count: 16, expiry: T::lit(300.0), settle: T::lit(60.0), max_wait: T::lit(300.0) }
    }
}

impl<T: Real> WindowConfig<T> {
    /// Never triggers before the final flush.
    pub fn whole_stream() -> Self {
        Self { count: usize::MAX, expiry: T::infinity(), settle: T::zero(), max_wait: T::infinity() }
    }
}

struct Entry<T> {
    tr: SubTrajectory<T>,
    sig: Signature<T>,
    successor_open: bool,
    predecessor_open: bool,
}

pub struct OnlineMatcher<T> {
    bundle: ModelBundle<T>,
    tau: T,
    config: WindowConfig<T>,
    buffer: Vec<Entry<T>>,
    arrivals: usize,
    now: Option<T>,
    last_solve: Option<T>,
    next_window: u64,
}

impl<T: Real> OnlineMatcher<T> {
    pub fn new(bundle: ModelBundle<T>, tau: T, config: WindowConfig<T>) -> Self {
        Self { bundle, tau, config, buffer: Vec::new(), arrivals: 0, now: None, last_solve: None, next_window: 0 }
    }

    pub fn bundle(&self) -> &ModelBundle<T> {
        &self.bundle
    }

    /// Swaps the scoring model between windows; buffered signatures are recomputed.
    pub fn set_model(&mut self, bundle: ModelBundle<T>) -> Result<()> {
        for e in &mut self.buffer {
            e.sig = bundle.signature(&e.tr)?;
        }
        self.bundle = bundle;
        Ok(())
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Adds one sub-trajectory and runs a window if a trigger fires.
    pub fn push(&mut self, tr: SubTrajectory<T>) -> Result<Vec<MatchResult<T>>> {
        let sig = self.bundle.signature(&tr)?;
        let t = tr.t_end;
        self.now = Some(self.now.map_or(t, |n| n.max(t)));
        self.last_solve.get_or_insert(t);
        self.buffer.push(Entry { tr, sig, successor_open: true, predecessor_open: true });
        self.arrivals += 1;
        self.maybe_solve()
    }

    /// Advances stream time without new data (for time-based expiry).
    pub fn advance_to(&mut self, t: T) -> Result<Vec<MatchResult<T>>> {
        self.now = Some(self.now.map_or(t, |n| n.max(t)));
        self.maybe_solve()
    }

    /// Solves whatever is buffered and closes every open slot.
    pub fn flush(&mut self) -> Result<Vec<MatchResult<T>>> {
        let out = self.solve(true)?;
        self.buffer.clear();
        self.arrivals = 0;
        Ok(out.into_iter().collect())
    }

    fn maybe_solve(&mut self) -> Result<Vec<MatchResult<T>>> {
        let (Some(now), Some(last)) = (self.now, self.last_solve) else {
            return Ok(Vec::new());
        };
        if self.arrivals >= self.config.count || now - last >= self.config.expiry {
            Ok(self.solve(false)?.into_iter().collect())
        } else {
            Ok(Vec::new())
        }
    }

    fn solve(&mut self, final_flush: bool) -> Result<Option<MatchResult<T>>> {
        self.arrivals = 0;
        self.last_solve = self.now;
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let now = self.now.unwrap_or_else(T::zero);
        let cfg = self.config;
        let can_precede: Vec<bool> =
            self.buffer.iter().map(|e| e.successor_open && (final_flush || now - e.tr.t_end >= cfg.settle)).collect();
        let can_follow: Vec<bool> = self.buffer.iter().map(|e| e.predecessor_open).collect();
        let refs: Vec<&SubTrajectory<T>> = self.buffer.iter().map(|e| &e.tr).collect();
        let sigs: Vec<Signature<T>> = self.buffer.iter().map(|e| e.sig.clone()).collect();
        let graph = build_graph_signed(&refs, &sigs, &can_precede, &can_follow, &self.bundle, self.tau)?;
        let solved = solve_matching(&graph);

        for &(u, v, _) in &solved.pairs {
            for e in &mut self.buffer {
                if e.tr.id == u {
                    e.successor_open = false;
                }
                if e.tr.id == v {
                    e.predecessor_open = false;
                }
            }
        }
        let mut terminals = Vec::new();
        for e in &mut self.buffer {
            if e.successor_open && (final_flush || now - e.tr.t_end > cfg.max_wait) {
                e.successor_open = false;
                terminals.push(e.tr.id);
            }
        }
        terminals.sort_unstable();
        self.buffer
            .retain(|e| e.successor_open || (e.predecessor_open && !final_flush && now - e.tr.t_start <= cfg.max_wait));
        if solved.pairs.is_empty() && terminals.is_empty() {
            return Ok(None);
        }
        let mut nodes: Vec<_> = solved.pairs.iter().flat_map(|p| [p.0, p.1]).chain(terminals.iter().copied()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let sequences = assemble_sequences(&nodes, &solved.pairs);
        let result = MatchResult { window_id: self.next_window, pairs: solved.pairs, terminals, sequences };
        self.next_window += 1;
        Ok(Some(result))
    }
}

/// Runs a whole stream through an online matcher.
pub fn match_online<T: Real, I>(
    stream: I,
    bundle: ModelBundle<T>,
    tau: T,
    config: WindowConfig<T>,
) -> Result<Vec<MatchResult<T>>>
where
    I: IntoIterator<Item = SubTrajectory<T>>,
{
    let mut m = OnlineMatcher::new(bundle, tau, config);
    let mut out = Vec::new();
    for tr in stream {
        out.extend(m.push(tr)?);
    }
    out.extend(m.flush()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::GmmGrid;
    use crate::matcher::affinity::{Factors, P1Mode};
    use crate::matcher::graph::build_graph;
    use crate::spatiotemporal::{TransitionMatrix, TravelParams, TravelTimeModel};

    fn bundle() -> ModelBundle<f64> {
        ModelBundle {
            grid: GmmGrid::default(),
            net: None,
            transitions: TransitionMatrix::uniform(2, 1.0),
            travel: TravelTimeModel::uniform(TravelParams::default()),
            p1_mode: P1Mode::Height,
            sigma_h: 0.05,
            factors: Factors::ALL,
        }
    }

    fn tr(id: u64, t0: f64, t1: f64) -> SubTrajectory<f64> {
        SubTrajectory {
            id,
            sensor_id: 0,
            t_start: t0,
            t_end: t1,
            start_gate: Some(0),
            end_gate: Some(1),
            samples: vec![[t0, 0.0, 0.0], [t1, 0.0, 0.0]],
            segments: vec![],
        }
    }

    #[test]
    fn empty_stream_emits_nothing() {
        assert!(match_online(Vec::new(), bundle(), 0.05, WindowConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn lone_subtrajectory_becomes_terminal() {
        let out = match_online(vec![tr(7, 0.0, 3.0)], bundle(), 0.05, WindowConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].pairs.is_empty());
        assert_eq!(out[0].terminals, vec![7]);
    }

    #[test]
    fn whole_stream_window_equals_batch() {
        let subs = vec![tr(1, 0.0, 2.0), tr(2, 1.0, 3.0), tr(3, 4.0, 6.0), tr(4, 5.0, 8.0), tr(5, 9.0, 9.5)];
        let batch = solve_matching(&build_graph(&subs, &bundle(), 0.05).unwrap());
        let online = match_online(subs, bundle(), 0.05, WindowConfig::whole_stream()).unwrap();
        assert_eq!(online, vec![batch]);
    }

    #[test]
    fn expired_successor_slot_is_reported() {
        let cfg = WindowConfig { count: 1, expiry: 1e9, settle: 0.0, max_wait: 10.0 };
        let mut m = OnlineMatcher::new(bundle(), 0.05, cfg);
        assert!(m.push(tr(1, 0.0, 1.0)).unwrap().is_empty());
        let out = m.push(tr(2, 200.0, 201.0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].terminals, vec![1]);
        assert!(out[0].pairs.is_empty());
    }
}
