// SPDX-License-Identifier: Apache-2.0

//! Per-sensor tracking of human segments into sub-trajectories.
//!
//! Each track is a constant-velocity Kalman filter over `(x, y, vx, vy)`.
//! Segments are associated to predicted positions with a gated Hungarian
//! assignment on Euclidean distance.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::geometry::{HumanSegment, SensorId};
use crate::scalar::Real;
use crate::spatiotemporal::{Gate, GateId};

pub type SubTrajectoryId = u64;

/// One person's track inside one sensor's trajectory area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SubTrajectory<T> {
    pub id: SubTrajectoryId,
    pub sensor_id: SensorId,
    pub t_start: T,
    pub t_end: T,
    /// `None` when the start point is not near any gate.
    pub start_gate: Option<GateId>,
    pub end_gate: Option<GateId>,
    /// `(t, x, y)` in strictly increasing time.
    pub samples: Vec<[T; 3]>,
    /// Subsampled member segments kept for appearance features.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<HumanSegment<T>>,
}

impl<T: Real> SubTrajectory<T> {
    pub fn start_xy(&self) -> [T; 2] {
        let s = self.samples[0];
        [s[1], s[2]]
    }

    pub fn end_xy(&self) -> [T; 2] {
        let s = self.samples[self.samples.len() - 1];
        [s[1], s[2]]
    }
}

/// `a < b` iff `a` ends strictly before `b` starts.
pub fn temporal_precedes<T: Real>(a: &SubTrajectory<T>, b: &SubTrajectory<T>) -> bool {
    a.t_end < b.t_start
}

fn nearest_gate<T: Real>(p: [T; 2], sensor: SensorId, gates: &[Gate<T>], delta: T) -> Option<GateId> {
    let tie = T::lit(1e-12);
    let mut best: Option<(T, GateId)> = None;
    for g in gates.iter().filter(|g| g.sensor_id == sensor) {
        let d = g.distance_to(p);
        if d > delta {
            continue;
        }
        best = match best {
            None => Some((d, g.id)),
            Some((bd, bid)) => {
                if d < bd - tie || ((d - bd).abs() <= tie && g.id < bid) {
                    Some((d, g.id))
                } else {
                    Some((bd, bid))
                }
            }
        };
    }
    best.map(|(_, id)| id)
}

/// Snaps both endpoints to the nearest gate of the same sensor within `delta_gate`.
pub fn assign_gates<T: Real>(mut tr: SubTrajectory<T>, gates: &[Gate<T>], delta_gate: T) -> SubTrajectory<T> {
    if tr.samples.is_empty() {
        return tr;
    }
    tr.start_gate = nearest_gate(tr.start_xy(), tr.sensor_id, gates, delta_gate);
    tr.end_gate = nearest_gate(tr.end_xy(), tr.sensor_id, gates, delta_gate);
    tr
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct TrackerParams<T> {
    /// Process noise, white acceleration std (m/s^2).
    pub sigma_accel: T,
    /// Measurement noise std (m).
    pub sigma_meas: T,
    /// Initial velocity std of a spawned track (m/s).
    pub sigma_velocity0: T,
    /// Association gate radius (m).
    pub gate_radius: T,
    /// A track terminates after missing more than this many frames.
    pub max_missed: usize,
    /// Shorter tracks are discarded as clutter.
    pub min_track_len: usize,
    /// Keep every n-th associated segment for appearance features.
    pub segment_stride: usize,
}

impl<T: Real> Default for TrackerParams<T> {
    fn default() -> Self {
        Self {
            sigma_accel: T::lit(0.5),
            sigma_meas: T::lit(0.1),
            sigma_velocity0: T::lit(1.5),
            gate_radius: T::lit(0.8),
            max_missed: 5,
            min_track_len: 3,
            segment_stride: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackState<T> {
    pub position: [T; 2],
    pub velocity: [T; 2],
    /// Covariance over `(x, y, vx, vy)`.
    pub covariance: [[T; 4]; 4],
    pub frames_missed: usize,
}

impl<T: Real> TrackState<T> {
    pub fn spawn(position: [T; 2], params: &TrackerParams<T>) -> Self {
        let mut covariance = [[T::zero(); 4]; 4];
        let pv = params.sigma_meas * params.sigma_meas;
        let vv = params.sigma_velocity0 * params.sigma_velocity0;
        covariance[0][0] = pv;
        covariance[1][1] = pv;
        covariance[2][2] = vv;
        covariance[3][3] = vv;
        Self { position, velocity: [T::zero(); 2], covariance, frames_missed: 0 }
    }

    fn vector(&self) -> [T; 4] {
        [self.position[0], self.position[1], self.velocity[0], self.velocity[1]]
    }

    fn set_vector(&mut self, x: [T; 4]) {
        self.position = [x[0], x[1]];
        self.velocity = [x[2], x[3]];
    }

    /// Constant-velocity prediction with white-acceleration process noise.
    pub fn predict(&mut self, dt: T, sigma_accel: T) {
        let mut x = self.vector();
        x[0] = x[0] + dt * x[2];
        x[1] = x[1] + dt * x[3];
        self.set_vector(x);

        let mut f = identity4::<T>();
        f[0][2] = dt;
        f[1][3] = dt;
        let mut p = mul4(&mul4(&f, &self.covariance), &transpose4(&f));
        let q = sigma_accel * sigma_accel;
        let (dt2, dt3, dt4) = (dt * dt, dt * dt * dt, dt * dt * dt * dt);
        let (qpp, qpv, qvv) = (q * dt4 / T::lit(4.0), q * dt3 / T::lit(2.0), q * dt2);
        for axis in 0..2 {
            let (ip, iv) = (axis, axis + 2);
            p[ip][ip] = p[ip][ip] + qpp;
            p[ip][iv] = p[ip][iv] + qpv;
            p[iv][ip] = p[iv][ip] + qpv;
            p[iv][iv] = p[iv][iv] + qvv;
        }
        self.covariance = symmetrize(p);
    }

    /// Kalman update with a position measurement (Joseph form).
    pub fn update(&mut self, z: [T; 2], sigma_meas: T) {
        let r = sigma_meas * sigma_meas;
        let p = self.covariance;
        let s = [[p[0][0] + r, p[0][1]], [p[1][0], p[1][1] + r]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let s_inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let mut k = [[T::zero(); 2]; 4];
        for (i, row) in k.iter_mut().enumerate() {
            for (j, kij) in row.iter_mut().enumerate() {
                *kij = p[i][0] * s_inv[0][j] + p[i][1] * s_inv[1][j];
            }
        }
        let y = [z[0] - self.position[0], z[1] - self.position[1]];
        let mut x = self.vector();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = *xi + k[i][0] * y[0] + k[i][1] * y[1];
        }
        self.set_vector(x);

        let mut ikh = identity4::<T>();
        for (i, row) in ikh.iter_mut().enumerate() {
            row[0] = row[0] - k[i][0];
            row[1] = row[1] - k[i][1];
        }
        let mut joseph = mul4(&mul4(&ikh, &p), &transpose4(&ikh));
        for (i, row) in joseph.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v + r * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
            }
        }
        self.covariance = symmetrize(joseph);
    }
}

fn identity4<T: Real>() -> [[T; 4]; 4] {
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

fn mul4<T: Real>(a: &[[T; 4]; 4], b: &[[T; 4]; 4]) -> [[T; 4]; 4] {
    let mut m = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    m
}

fn transpose4<T: Real>(a: &[[T; 4]; 4]) -> [[T; 4]; 4] {
    let mut m = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = a[j][i];
        }
    }
    m
}

fn symmetrize<T: Real>(mut p: [[T; 4]; 4]) -> [[T; 4]; 4] {
    let half = T::lit(0.5);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = (p[i][j] + p[j][i]) * half;
            p[i][j] = v;
            p[j][i] = v;
        }
    }
    p
}

#[derive(Clone, Debug)]
pub struct Track<T> {
    pub id: u64,
    pub sensor_id: SensorId,
    pub state: TrackState<T>,
    pub samples: Vec<[T; 3]>,
    pub segments: Vec<HumanSegment<T>>,
}

impl<T: Real> Track<T> {
    fn spawn(id: u64, segment: &HumanSegment<T>, params: &TrackerParams<T>) -> Self {
        let state = TrackState::spawn(segment.centroid_xy, params);
        Self {
            id,
            sensor_id: segment.sensor_id,
            samples: vec![[segment.t, state.position[0], state.position[1]]],
            segments: vec![segment.clone()],
            state,
        }
    }

    fn absorb(&mut self, segment: &HumanSegment<T>, params: &TrackerParams<T>) {
        self.state.update(segment.centroid_xy, params.sigma_meas);
        self.state.frames_missed = 0;
        self.samples.push([segment.t, self.state.position[0], self.state.position[1]]);
        if (self.samples.len() - 1).is_multiple_of(params.segment_stride.max(1)) {
            self.segments.push(segment.clone());
        }
    }

    /// Converts to a sub-trajectory, or `None` if too short to keep.
    pub fn into_sub_trajectory(self, min_len: usize) -> Option<SubTrajectory<T>> {
        if self.samples.len() < min_len.max(1) {
            return None;
        }
        Some(SubTrajectory {
            id: self.id,
            sensor_id: self.sensor_id,
            t_start: self.samples[0][0],
            t_end: self.samples[self.samples.len() - 1][0],
            start_gate: None,
            end_gate: None,
            samples: self.samples,
            segments: self.segments,
        })
    }
}

#[derive(Debug)]
pub struct StepOutcome<T> {
    pub updated: Vec<Track<T>>,
    pub spawned: Vec<Track<T>>,
    pub terminated: Vec<SubTrajectory<T>>,
}

/// Optimal gated association: `track index -> segment index`.
pub fn associate<T: Real>(predicted: &[[T; 2]], segments: &[HumanSegment<T>], gate: T) -> Vec<Option<usize>> {
    let (nt, ns) = (predicted.len(), segments.len());
    if nt == 0 || ns == 0 {
        return vec![None; nt];
    }
    let n = nt + ns;
    let forbidden = gate * T::of_usize(4 * n + 4);
    let cost = Array2::from_shape_fn((n, n), |(r, c)| match (r < nt, c < ns) {
        (true, true) => {
            let (p, q) = (predicted[r], segments[c].centroid_xy);
            let d = ((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1])).sqrt();
            if d <= gate {
                d
            } else {
                forbidden
            }
        }
        (false, false) => T::zero(),
        _ => gate,
    });
    let assignment = min_cost_assignment(&cost, nt);
    (0..nt)
        .map(|r| {
            let c = assignment[r];
            (c < ns && cost[[r, c]] <= gate).then_some(c)
        })
        .collect()
}

/// Advances all tracks by `dt`, associates the new segments, spawns tracks
/// for unclaimed segments and terminates tracks that missed too many frames.
pub fn track_step<T: Real>(
    tracks: Vec<Track<T>>,
    segments: &[HumanSegment<T>],
    dt: T,
    params: &TrackerParams<T>,
    next_id: &mut u64,
) -> StepOutcome<T> {
    let mut tracks = tracks;
    for tr in &mut tracks {
        tr.state.predict(dt, params.sigma_accel);
    }
    let predicted: Vec<[T; 2]> = tracks.iter().map(|t| t.state.position).collect();
    let links = associate(&predicted, segments, params.gate_radius);

    let mut claimed = vec![false; segments.len()];
    let mut updated = Vec::new();
    let mut terminated = Vec::new();
    for (mut tr, link) in tracks.into_iter().zip(links) {
        match link {
            Some(s) => {
                claimed[s] = true;
                tr.absorb(&segments[s], params);
                updated.push(tr);
            }
            None => {
                tr.state.frames_missed += 1;
                if tr.state.frames_missed > params.max_missed {
                    terminated.extend(tr.into_sub_trajectory(params.min_track_len));
                } else {
                    updated.push(tr);
                }
            }
        }
    }
    let spawned = segments
        .iter()
        .zip(&claimed)
        .filter(|(_, &c)| !c)
        .map(|(seg, _)| {
            let id = *next_id;
            *next_id += 1;
            Track::spawn(id, seg, params)
        })
        .collect();
    StepOutcome { updated, spawned, terminated }
}

/// Stateful tracker for one sensor.
#[derive(Debug)]
pub struct Tracker<T> {
    pub sensor_id: SensorId,
    pub params: TrackerParams<T>,
    tracks: Vec<Track<T>>,
    last_t: Option<T>,
    next_id: u64,
}

impl<T: Real> Tracker<T> {
    pub fn new(sensor_id: SensorId, params: TrackerParams<T>) -> Self {
        Self { sensor_id, params, tracks: Vec::new(), last_t: None, next_id: (sensor_id as u64) << 32 }
    }

    pub fn active(&self) -> &[Track<T>] {
        &self.tracks
    }

    /// Feeds the segments of the frame at time `t`; returns finished sub-trajectories.
    pub fn step(&mut self, t: T, segments: &[HumanSegment<T>]) -> Vec<SubTrajectory<T>> {
        let dt = match self.last_t {
            Some(prev) if t > prev => t - prev,
            _ => T::lit(0.1),
        };
        self.last_t = Some(t);
        let tracks = std::mem::take(&mut self.tracks);
        let out = track_step(tracks, segments, dt, &self.params, &mut self.next_id);
        self.tracks = out.updated;
        self.tracks.extend(out.spawned);
        out.terminated
    }

    /// Terminates every active track.
    pub fn finish(&mut self) -> Vec<SubTrajectory<T>> {
        let min_len = self.params.min_track_len;
        self.tracks.drain(..).filter_map(|t| t.into_sub_trajectory(min_len)).collect()
    }
}
