// SPDX-License-Identifier: Apache-2.0

//! Frames to labelled sub-trajectories.

use std::collections::{BTreeMap, HashMap};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{
    build_background, segment_humans, subtract_background, voxel_downsample, BackgroundModel, Frame, HumanSegment,
    SensorId,
};
use crate::simulator::{calibration_frames, MapSpec, ScenarioSpec, Simulation, TruthSample};
use crate::spatiotemporal::Gate;
use crate::tracker::{assign_gates, SubTrajectory, Tracker, TrackerParams};

struct SensorPipeline {
    background: BackgroundModel<f64>,
    tracker: Tracker<f64>,
}

/// Per-sensor background subtraction, clustering and tracking.
pub struct Extractor {
    cell: f64,
    eps: f64,
    min_pts: usize,
    delta: f64,
    gates: Vec<Gate<f64>>,
    sensors: BTreeMap<SensorId, SensorPipeline>,
}

impl Extractor {
    /// `calibration` holds pedestrian-free frames, grouped per sensor.
    pub fn new(
        map: &MapSpec,
        calibration: &[Vec<Frame<f64>>],
        config: &Config,
        tracker: TrackerParams<f64>,
    ) -> Result<Self> {
        let seg = &config.segmentation;
        let mut sensors = BTreeMap::new();
        for frames in calibration {
            let background = build_background(frames, seg.background_voxel, seg.occupancy_fraction)?;
            let id = background.sensor_id;
            sensors.insert(id, SensorPipeline { background, tracker: Tracker::new(id, tracker) });
        }
        Ok(Self {
            cell: seg.downsample_cell,
            eps: seg.dbscan_eps,
            min_pts: seg.dbscan_min_pts,
            delta: seg.gate_delta,
            gates: map.gates(),
            sensors,
        })
    }

    /// Simulated map with its own calibration frames.
    pub fn for_map(map: &MapSpec, config: &Config, tracker: TrackerParams<f64>) -> Result<Self> {
        let calib = calibration_frames(map, config.segmentation.calibration_frames);
        Self::new(map, &calib, config, tracker)
    }

    /// Human segments of one frame.
    pub fn segments(&self, frame: &Frame<f64>) -> Result<Vec<HumanSegment<f64>>> {
        let p = self
            .sensors
            .get(&frame.sensor_id)
            .ok_or_else(|| Error::Invalid(format!("no background model for sensor {}", frame.sensor_id)))?;
        let fg = subtract_background(frame, &p.background);
        let points = voxel_downsample(&fg.points, self.cell)?;
        Ok(segment_humans(&Frame { sensor_id: frame.sensor_id, t: frame.t, points }, self.eps, self.min_pts))
    }

    /// Feeds one frame; returns the sub-trajectories that ended with it.
    pub fn process(&mut self, frame: &Frame<f64>) -> Result<Vec<SubTrajectory<f64>>> {
        let segments = self.segments(frame)?;
        let p = self.sensors.get_mut(&frame.sensor_id).expect("checked in segments");
        let done = p.tracker.step(frame.t, &segments);
        Ok(done.into_iter().map(|s| assign_gates(s, &self.gates, self.delta)).collect())
    }

    pub fn finish(&mut self) -> Vec<SubTrajectory<f64>> {
        let mut out = Vec::new();
        for p in self.sensors.values_mut() {
            out.extend(p.tracker.finish().into_iter().map(|s| assign_gates(s, &self.gates, self.delta)));
        }
        out
    }
}

/// Sorts by `(t_start, sensor_id)` and assigns ids `0..n` in that order.
pub fn renumber(mut subs: Vec<SubTrajectory<f64>>) -> Vec<SubTrajectory<f64>> {
    subs.sort_by(|a, b| a.t_start.total_cmp(&b.t_start).then(a.sensor_id.cmp(&b.sensor_id)).then(a.id.cmp(&b.id)));
    for (i, s) in subs.iter_mut().enumerate() {
        s.id = i as u64;
    }
    subs
}

/// Extracted sub-trajectories with the positions they came from.
#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub subs: Vec<SubTrajectory<f64>>,
    pub truth: Vec<TruthSample>,
}

/// Simulates `scenario` and extracts renumbered sub-trajectories.
pub fn run_scene(
    map: &MapSpec,
    scenario: &ScenarioSpec,
    config: &Config,
    tracker: TrackerParams<f64>,
) -> Result<Scene> {
    let mut ex = Extractor::for_map(map, config, tracker)?;
    let mut scene = Scene::default();
    for step in Simulation::new(map, scenario)? {
        for f in &step.frames {
            scene.subs.extend(ex.process(f)?);
        }
        scene.truth.extend(step.truth);
    }
    scene.subs.extend(ex.finish());
    scene.subs = renumber(std::mem::take(&mut scene.subs));
    Ok(scene)
}

fn tick_key(t: f64) -> i64 {
    (t * 10.0).round() as i64
}

/// Ground-truth positions indexed by tick.
pub struct TruthIndex {
    by_tick: HashMap<i64, Vec<TruthSample>>,
    radius: f64,
}

impl TruthIndex {
    pub fn new(truth: &[TruthSample], radius: f64) -> Self {
        let mut by_tick: HashMap<i64, Vec<TruthSample>> = HashMap::new();
        for s in truth {
            by_tick.entry(tick_key(s.t)).or_default().push(*s);
        }
        Self { by_tick, radius }
    }

    /// Closest person to `(x, y)` at time `t`, within the radius.
    pub fn nearest(&self, t: f64, x: f64, y: f64) -> Option<u32> {
        let mut best: Option<(f64, u32)> = None;
        for s in self.by_tick.get(&tick_key(t))? {
            let d = (s.x - x).hypot(s.y - y);
            if d <= self.radius && best.is_none_or(|(bd, bid)| d < bd || (d == bd && s.person_id < bid)) {
                best = Some((d, s.person_id));
            }
        }
        best.map(|b| b.1)
    }

    /// Majority person over the samples of `tr`; ties go to the smaller id.
    pub fn label(&self, tr: &SubTrajectory<f64>) -> Option<u32> {
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for s in &tr.samples {
            if let Some(p) = self.nearest(s[0], s[1], s[2]) {
                *votes.entry(p).or_default() += 1;
            }
        }
        let mut best: Option<(u32, usize)> = None;
        for (p, n) in votes {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((p, n));
            }
        }
        // A track that is mostly clutter is not anybody's.
        best.filter(|&(_, n)| 2 * n >= tr.samples.len()).map(|b| b.0)
    }

    pub fn label_segment(&self, s: &HumanSegment<f64>) -> Option<u32> {
        self.nearest(s.t, s.centroid_xy[0], s.centroid_xy[1])
    }
}

/// Person label of every sub-trajectory.
pub fn label_subtrajectories(
    subs: &[SubTrajectory<f64>],
    truth: &[TruthSample],
    radius: f64,
) -> BTreeMap<u64, Option<u32>> {
    let index = TruthIndex::new(truth, radius);
    subs.iter().map(|s| (s.id, index.label(s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{square_loop_map, BodyModel, DensityProfile, SubjectPlan};

    fn straight(speed: f64) -> ScenarioSpec {
        let mut body = BodyModel::sample(0, 0);
        body.speed = speed;
        ScenarioSpec {
            name: "straight".into(),
            seed: 1,
            interval: 0.0,
            duration: 6.0,
            profile: DensityProfile::Dense,
            subjects: vec![SubjectPlan {
                body,
                route: vec![[0.0, 0.0], [7.0, 0.0]],
                closed: false,
                start: 0.0,
                walk_time: None,
                lateral_offset: 0.0,
            }],
        }
    }

    #[test]
    fn background_is_removed() {
        let map = square_loop_map();
        let cfg = Config::default();
        let ex = Extractor::for_map(&map, &cfg, cfg.tracker).unwrap();
        for frames in calibration_frames(&map, 1) {
            assert!(ex.segments(&frames[0]).unwrap().is_empty());
        }
    }

    #[test]
    fn straight_walk_gives_one_gated_track() {
        let map = square_loop_map();
        let cfg = Config::default();
        let scene = run_scene(&map, &straight(1.25), &cfg, cfg.tracker).unwrap();
        assert_eq!(
            scene.subs.len(),
            1,
            "{:?}",
            scene.subs.iter().map(|s| (s.sensor_id, s.t_start, s.t_end)).collect::<Vec<_>>()
        );
        let s = &scene.subs[0];
        assert_eq!((s.sensor_id, s.start_gate, s.end_gate), (0, Some(0), Some(1)));
        let labels = label_subtrajectories(&scene.subs, &scene.truth, 0.6);
        assert_eq!(labels[&0], Some(0));
        // Tracked positions stay close to the walked line.
        let index = TruthIndex::new(&scene.truth, 0.3);
        assert!(s.samples.iter().all(|p| index.nearest(p[0], p[1], p[2]).is_some()));
    }

    #[test]
    fn renumbering_orders_by_start() {
        let mk = |id, sensor_id, t_start| SubTrajectory {
            id,
            sensor_id,
            t_start,
            t_end: t_start + 1.0,
            start_gate: None,
            end_gate: None,
            samples: vec![[t_start, 0.0, 0.0]],
            segments: vec![],
        };
        let out = renumber(vec![mk(99, 1, 5.0), mk(7, 0, 5.0), mk(3, 2, 1.0)]);
        assert_eq!(out.iter().map(|s| (s.id, s.sensor_id)).collect::<Vec<_>>(), vec![(0, 2), (1, 0), (2, 1)]);
    }
}
