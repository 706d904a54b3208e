// SPDX-License-Identifier: Apache-2.0

//! Detection of unambiguous single-pedestrian transitions between gates.

use std::collections::VecDeque;

use super::GateId;
use crate::scalar::{cmp_real, Real};
use crate::tracker::SubTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// A sub-trajectory began (person entered a trajectory area).
    Enter,
    /// A sub-trajectory ended (person left a trajectory area).
    Exit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateEvent<T> {
    pub t: T,
    pub kind: EventKind,
    pub gate: Option<GateId>,
    pub sub_trajectory: u64,
}

/// `(exit gate, entry gate, travel time)` of a high-confidence transition.
pub type HighConfidence<T> = (GateId, GateId, T);

/// Entry/exit log of a set of sub-trajectories ordered by time.
pub fn gate_events<T: Real>(subs: &[SubTrajectory<T>]) -> Vec<GateEvent<T>> {
    let mut events: Vec<GateEvent<T>> = subs
        .iter()
        .flat_map(|s| {
            [
                GateEvent { t: s.t_start, kind: EventKind::Enter, gate: s.start_gate, sub_trajectory: s.id },
                GateEvent { t: s.t_end, kind: EventKind::Exit, gate: s.end_gate, sub_trajectory: s.id },
            ]
        })
        .collect();
    events.sort_by(|a, b| cmp_real(&a.t, &b.t).then(a.kind.cmp(&b.kind)).then(a.sub_trajectory.cmp(&b.sub_trajectory)));
    events
}

/// Emits a transition when an exit is immediately followed by an entry
/// within `window` seconds while nobody else is between areas.
///
/// Exits not followed by an entry within `window` are taken to have left the
/// monitored space and stop blocking detection.
pub fn detect_high_confidence<T: Real>(events: &[GateEvent<T>], window: T) -> Vec<HighConfidence<T>> {
    detect_transitions(events, window).into_iter().map(|(hc, _)| hc).collect()
}

/// Like [`detect_high_confidence`], with the entry time of each transition.
pub fn detect_transitions<T: Real>(events: &[GateEvent<T>], window: T) -> Vec<(HighConfidence<T>, T)> {
    let mut out = Vec::new();
    let mut pending: VecDeque<GateEvent<T>> = VecDeque::new();
    let mut previous: Option<&GateEvent<T>> = None;
    for ev in events {
        while pending.front().is_some_and(|p| ev.t - p.t > window) {
            pending.pop_front();
        }
        match ev.kind {
            EventKind::Exit => pending.push_back(*ev),
            EventKind::Enter => {
                if let (1, Some(prev)) = (pending.len(), previous) {
                    let exit = pending[0];
                    let dt = ev.t - exit.t;
                    if prev.kind == EventKind::Exit
                        && prev.sub_trajectory == exit.sub_trajectory
                        && dt > T::zero()
                        && dt <= window
                    {
                        if let (Some(g1), Some(g2)) = (exit.gate, ev.gate) {
                            out.push(((g1, g2, dt), ev.t));
                        }
                    }
                }
                pending.pop_front();
            }
        }
        previous = Some(ev);
    }
    out
}
