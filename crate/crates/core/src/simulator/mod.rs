// SPDX-License-Identifier: Apache-2.0

//! Synthetic multi-LiDAR scenes: walking bodies sampled by sensors with
//! distance-dependent density, range noise and blanked regions.

pub mod body;
pub mod map;
pub mod scenario;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use body::{BodyModel, Pose, Primitive};
pub use map::{
    corridor_map, point_in_polygon, square_loop_map, DensityParams, DensityProfile, GateSpec, MapSpec, Rect,
    SensorSpec, StaticBox, CORRIDOR_DOORS, CORRIDOR_LENGTH, CORRIDOR_WIDTH, SQUARE_LOOP_ROUTE,
};
pub use scenario::{
    corridor_traffic, enrollment_scenario, loop_scenario, population, scenario_1a, ScenarioSpec, SubjectPlan,
    WalkState, DEFAULT_WALK_TIME, SUPPORTED_SUBJECTS, TICK,
};

use crate::error::{Error, Result};
use crate::geometry::{Frame, Point3};

/// Where a person was at one tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub person_id: u32,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Everything produced at one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    pub t: f64,
    /// One frame per sensor, in map order.
    pub frames: Vec<Frame<f64>>,
    pub truth: Vec<TruthSample>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOutput {
    pub frames: Vec<Frame<f64>>,
    pub truth: Vec<TruthSample>,
}

pub fn tick_time(tick: u64) -> f64 {
    tick as f64 / 10.0
}

/// Random stream for one sensor at one tick, independent of every other pair.
pub fn substream(seed: u64, sensor: u32, tick: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sensor as u64) << 40) | tick);
    rng
}

fn keep(map: &MapSpec, s: &SensorSpec, p: [f64; 3]) -> bool {
    p.iter().all(|v| v.is_finite()) && map.in_area(s, p[0], p[1]) && s.sees(p)
}

/// Noise-free returns from the floor and static objects.
pub fn static_points(map: &MapSpec, s: &SensorSpec) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    if map.floor_spacing > 0.0 {
        let h = map.floor_spacing;
        let (x0, x1) = (s.area.min[0], s.area.max[0]);
        let (y0, y1) = (s.area.min[1], s.area.max[1]);
        let nx = ((x1 - x0) / h).floor() as i64;
        let ny = ((y1 - y0) / h).floor() as i64;
        for i in 0..=nx {
            for j in 0..=ny {
                let p = [x0 + (i as f64 + 0.5) * h, y0 + (j as f64 + 0.5) * h, 0.0];
                if map.on_floor(p[0], p[1]) && keep(map, s, p) {
                    out.push(Point3::from(p));
                }
            }
        }
    }
    let h = 0.05;
    for b in &map.static_objects {
        for axis in 0..3 {
            for side in 0..2 {
                let mut normal = [0.0; 3];
                normal[axis] = if side == 0 { -1.0 } else { 1.0 };
                let fixed = if side == 0 { b.min[axis] } else { b.max[axis] };
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = ((b.max[u] - b.min[u]) / h).ceil().max(1.0) as i64;
                let nv = ((b.max[v] - b.min[v]) / h).ceil().max(1.0) as i64;
                for i in 0..nu {
                    for j in 0..nv {
                        let mut p = [0.0; 3];
                        p[axis] = fixed;
                        p[u] = b.min[u] + (i as f64 + 0.5) * (b.max[u] - b.min[u]) / nu as f64;
                        p[v] = b.min[v] + (j as f64 + 0.5) * (b.max[v] - b.min[v]) / nv as f64;
                        let view = [s.position[0] - p[0], s.position[1] - p[1], s.position[2] - p[2]];
                        let facing = normal[0] * view[0] + normal[1] * view[1] + normal[2] * view[2] > 0.0;
                        if facing && keep(map, s, p) {
                            out.push(Point3::from(p));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Pedestrian-free frames for building background models.
pub fn calibration_frames(map: &MapSpec, n: usize) -> Vec<Vec<Frame<f64>>> {
    map.sensors
        .iter()
        .map(|s| {
            let pts = static_points(map, s);
            (0..n).map(|k| Frame { sensor_id: s.sensor_id, t: -((n - k) as f64) * TICK, points: pts.clone() }).collect()
        })
        .collect()
}

/// Points per body at distance `d`.
pub fn body_point_count(density: &DensityParams, d: f64) -> usize {
    let raw = density.k / (d * d).max(1e-9);
    (raw.round() as usize).clamp(density.min_points, density.max_points)
}

/// Tick-by-tick scene generator.
pub struct Simulation<'a> {
    map: &'a MapSpec,
    scenario: &'a ScenarioSpec,
    statics: Vec<Vec<Point3<f64>>>,
    tick: u64,
    ticks: u64,
}

impl<'a> Simulation<'a> {
    pub fn new(map: &'a MapSpec, scenario: &'a ScenarioSpec) -> Result<Self> {
        scenario.validate()?;
        for p in &scenario.subjects {
            for w in &p.route {
                if !map.on_floor(w[0], w[1]) {
                    return Err(Error::RouteOutsideFloor(w[0], w[1]));
                }
            }
        }
        let statics = map.sensors.iter().map(|s| static_points(map, s)).collect();
        Ok(Self { map, scenario, statics, tick: 0, ticks: scenario.ticks() })
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Frame of sensor index `k` at `tick`, given the walking subjects.
    fn frame(&self, k: usize, tick: u64, walkers: &[(&SubjectPlan, WalkState)]) -> Frame<f64> {
        let s = &self.map.sensors[k];
        let t = tick_time(tick);
        let mut points = self.statics[k].clone();
        let mut rng = substream(self.scenario.seed, s.sensor_id, tick);
        for (plan, st) in walkers {
            // Bodies well outside the area cannot contribute.
            let margin = 1.0;
            let (x, y) = (st.xy[0], st.xy[1]);
            if x < s.area.min[0] - margin
                || x > s.area.max[0] + margin
                || y < s.area.min[1] - margin
                || y > s.area.max[1] + margin
            {
                continue;
            }
            let centre = [x, y, 0.5 * plan.body.height];
            let d = ((centre[0] - s.position[0]).powi(2)
                + (centre[1] - s.position[1]).powi(2)
                + (centre[2] - s.position[2]).powi(2))
            .sqrt();
            let n = body_point_count(&s.density, d);
            let pose = plan.body.pose(st.xy, st.heading, st.phase);
            for p in pose.sample_visible(s.position, n, s.density.range_noise, &mut rng) {
                if keep(self.map, s, p) {
                    points.push(Point3::from(p));
                }
            }
        }
        Frame { sensor_id: s.sensor_id, t, points }
    }
}

impl Iterator for Simulation<'_> {
    type Item = TickOutput;

    fn next(&mut self) -> Option<TickOutput> {
        if self.tick >= self.ticks {
            return None;
        }
        let tick = self.tick;
        self.tick += 1;
        let t = tick_time(tick);
        let walkers: Vec<(&SubjectPlan, WalkState)> =
            self.scenario.subjects.iter().filter_map(|p| p.state(t).map(|s| (p, s))).collect();
        let truth = walkers
            .iter()
            .map(|(p, s)| TruthSample { person_id: p.body.person_id, t, x: s.xy[0], y: s.xy[1] })
            .collect();
        let frames = (0..self.map.sensors.len()).map(|k| self.frame(k, tick, &walkers)).collect();
        Some(TickOutput { tick, t, frames, truth })
    }
}

/// Runs a whole scenario into memory.
pub fn simulate(map: &MapSpec, scenario: &ScenarioSpec) -> Result<SimOutput> {
    let mut out = SimOutput::default();
    for step in Simulation::new(map, scenario)? {
        out.frames.extend(step.frames);
        out.truth.extend(step.truth);
    }
    Ok(out)
}
