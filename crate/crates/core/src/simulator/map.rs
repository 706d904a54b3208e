// SPDX-License-Identifier: Apache-2.0

//! Floor plan, sensors, trajectory areas, blank regions and gates.

use serde::{Deserialize, Serialize};

use crate::geometry::SensorId;
use crate::spatiotemporal::{Gate, GateId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { min: [x0.min(x1), y0.min(y1)], max: [x0.max(x1), y0.max(y1)] }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }

    pub fn covers(&self, other: &Rect) -> bool {
        self.min[0] <= other.min[0]
            && self.min[1] <= other.min[1]
            && self.max[0] >= other.max[0]
            && self.max[1] >= other.max[1]
    }
}

/// Point budget and range noise of a sensor class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    /// Points per body at 1 m; the count falls off with distance squared.
    pub k: f64,
    pub min_points: usize,
    pub max_points: usize,
    /// Range noise standard deviation (m).
    pub range_noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityProfile {
    Dense,
    Sparse,
}

impl DensityProfile {
    pub fn params(self) -> DensityParams {
        match self {
            Self::Dense => DensityParams { k: 12_000.0, min_points: 300, max_points: 1500, range_noise: 0.02 },
            Self::Sparse => DensityParams { k: 800.0, min_points: 20, max_points: 80, range_noise: 0.001 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub sensor_id: SensorId,
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub max_range: f64,
    /// Nominal coverage; the trajectory area is this minus blank regions.
    pub area: Rect,
    pub density: DensityParams,
}

impl SensorSpec {
    /// True if `p` lies in the angular field of view and range.
    pub fn sees(&self, p: [f64; 3]) -> bool {
        let d = [p[0] - self.position[0], p[1] - self.position[1], p[2] - self.position[2]];
        let horiz = d[0].hypot(d[1]);
        let range = horiz.hypot(d[2]);
        if range > self.max_range || range <= 0.0 {
            return false;
        }
        let az = wrap_angle(d[1].atan2(d[0]) - self.yaw_deg.to_radians());
        let el = d[2].atan2(horiz) - self.pitch_deg.to_radians();
        az.abs() <= self.hfov_deg.to_radians() / 2.0 && el.abs() <= self.vfov_deg.to_radians() / 2.0
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a <= -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub id: GateId,
    pub sensor_id: SensorId,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Static box returned by sensors as background structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    /// Walkable floor polygon (counter-clockwise or clockwise).
    pub floor: Vec<[f64; 2]>,
    pub sensors: Vec<SensorSpec>,
    pub blank_regions: Vec<Rect>,
    pub gates: Vec<GateSpec>,
    #[serde(default)]
    pub static_objects: Vec<StaticBox>,
    /// Spacing of sampled floor returns; 0 disables them.
    #[serde(default)]
    pub floor_spacing: f64,
}

impl MapSpec {
    pub fn gates<T: crate::Real>(&self) -> Vec<Gate<T>> {
        self.gates
            .iter()
            .map(|g| Gate::new(g.id, g.sensor_id, [T::lit(g.a[0]), T::lit(g.a[1])], [T::lit(g.b[0]), T::lit(g.b[1])]))
            .collect()
    }

    pub fn gate_count(&self) -> usize {
        self.gates.iter().map(|g| g.id as usize + 1).max().unwrap_or(0)
    }

    pub fn sensor(&self, id: SensorId) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.sensor_id == id)
    }

    pub fn in_blank(&self, x: f64, y: f64) -> bool {
        self.blank_regions.iter().any(|r| r.contains(x, y))
    }

    /// Trajectory area membership of sensor `s`.
    pub fn in_area(&self, s: &SensorSpec, x: f64, y: f64) -> bool {
        s.area.contains(x, y) && !self.in_blank(x, y)
    }

    pub fn on_floor(&self, x: f64, y: f64) -> bool {
        point_in_polygon(&self.floor, x, y)
    }
}

/// Even-odd rule; points on an edge count as inside.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if crate::spatiotemporal::point_segment_distance([x, y], a, b) < 1e-9 {
            return true;
        }
        if (a[1] > y) != (b[1] > y) && x < a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]) {
            inside = !inside;
        }
    }
    inside
}

fn dense_sensor(id: SensorId, position: [f64; 3], yaw_deg: f64, area: Rect) -> SensorSpec {
    SensorSpec {
        sensor_id: id,
        position,
        yaw_deg,
        pitch_deg: -20.0,
        hfov_deg: 80.0,
        vfov_deg: 75.0,
        max_range: 15.0,
        area,
        density: DensityProfile::Dense.params(),
    }
}

/// Closed rectangular walking route of the square-loop testbed.
pub const SQUARE_LOOP_ROUTE: [[f64; 2]; 4] = [[0.0, 0.0], [7.0, 0.0], [7.0, 4.0], [0.0, 4.0]];

/// 7 m x 4 m walking loop seen by four dense sensors, one per side, with the
/// corners blanked so every lap crosses four unobserved gaps.
pub fn square_loop_map() -> MapSpec {
    let sensors = vec![
        dense_sensor(0, [3.5, -4.5, 2.5], 90.0, Rect::new(-1.5, -1.0, 8.5, 1.0)),
        dense_sensor(1, [11.0, 2.0, 2.5], 180.0, Rect::new(6.0, -1.5, 8.0, 5.5)),
        dense_sensor(2, [4.0, 8.5, 2.5], -90.0, Rect::new(-1.5, 3.0, 8.5, 5.0)),
        dense_sensor(3, [-4.0, 2.0, 2.5], 0.0, Rect::new(-1.0, -1.5, 1.0, 5.5)),
    ];
    let blank_regions = vec![
        Rect::new(-1.5, -1.5, 1.0, 1.0),
        Rect::new(5.5, -1.5, 8.5, 1.2),
        Rect::new(6.0, 3.0, 8.5, 5.5),
        Rect::new(-1.5, 3.0, 2.0, 5.5),
    ];
    let gate = |id, sensor_id, a, b| GateSpec { id, sensor_id, a, b };
    let gates = vec![
        gate(0, 0, [1.0, -1.0], [1.0, 1.0]),
        gate(1, 0, [5.5, -1.0], [5.5, 1.0]),
        gate(2, 1, [6.0, 1.2], [8.0, 1.2]),
        gate(3, 1, [6.0, 3.0], [8.0, 3.0]),
        gate(4, 2, [6.0, 3.0], [6.0, 5.0]),
        gate(5, 2, [2.0, 3.0], [2.0, 5.0]),
        gate(6, 3, [-1.0, 3.0], [1.0, 3.0]),
        gate(7, 3, [-1.0, 1.0], [1.0, 1.0]),
    ];
    MapSpec {
        name: "square-loop".into(),
        floor: vec![[-2.0, -2.0], [9.0, -2.0], [9.0, 6.0], [-2.0, 6.0]],
        sensors,
        blank_regions,
        gates,
        static_objects: vec![
            StaticBox { min: [3.3, -1.0, 0.0], max: [3.7, -0.8, 1.2] },
            StaticBox { min: [7.8, 1.8, 0.0], max: [8.0, 2.4, 2.0] },
            StaticBox { min: [3.8, 4.8, 0.0], max: [4.4, 5.0, 1.0] },
            StaticBox { min: [-1.0, 1.8, 0.0], max: [-0.8, 2.2, 2.0] },
        ],
        floor_spacing: 0.2,
    }
}

pub const CORRIDOR_LENGTH: f64 = 40.0;
pub const CORRIDOR_WIDTH: f64 = 3.0;

/// Side doors of the corridor: `(x, wall)` with wall 0 at y = 0 and 1 at y = width.
pub const CORRIDOR_DOORS: [(f64, u8); 4] = [(4.0, 1), (15.0, 0), (25.0, 1), (36.0, 0)];

/// 40 m x 3 m corridor with four sparse downward-looking ceiling sensors
/// separated by 2 m blank gaps. Gates sit on every area edge and side door.
pub fn corridor_map() -> MapSpec {
    let spans = [(0.0, 9.0), (11.0, 19.0), (21.0, 29.0), (31.0, 40.0)];
    let mut sensors = Vec::new();
    let mut gates = Vec::new();
    let mut next_gate = 0;
    for (i, &(x0, x1)) in spans.iter().enumerate() {
        let id = i as SensorId;
        let mid = 0.5 * (x0 + x1);
        sensors.push(SensorSpec {
            sensor_id: id,
            position: [mid, 1.5, 2.9],
            yaw_deg: 0.0,
            pitch_deg: -90.0,
            hfov_deg: 360.0,
            vfov_deg: 150.0,
            max_range: 8.0,
            area: Rect::new(x0, 0.0, x1, CORRIDOR_WIDTH),
            density: DensityProfile::Sparse.params(),
        });
        for x in [x0, x1] {
            gates.push(GateSpec { id: next_gate, sensor_id: id, a: [x, 0.0], b: [x, CORRIDOR_WIDTH] });
            next_gate += 1;
        }
        for &(dx, wall) in CORRIDOR_DOORS.iter().filter(|(dx, _)| *dx > x0 && *dx < x1) {
            let y = if wall == 0 { 0.0 } else { CORRIDOR_WIDTH };
            gates.push(GateSpec { id: next_gate, sensor_id: id, a: [dx - 0.6, y], b: [dx + 0.6, y] });
            next_gate += 1;
        }
    }
    MapSpec {
        name: "corridor".into(),
        floor: vec![
            [-1.0, -1.0],
            [CORRIDOR_LENGTH + 1.0, -1.0],
            [CORRIDOR_LENGTH + 1.0, CORRIDOR_WIDTH + 1.0],
            [-1.0, CORRIDOR_WIDTH + 1.0],
        ],
        sensors,
        blank_regions: vec![
            Rect::new(9.0, -1.0, 11.0, 4.0),
            Rect::new(19.0, -1.0, 21.0, 4.0),
            Rect::new(29.0, -1.0, 31.0, 4.0),
        ],
        gates,
        static_objects: vec![],
        floor_spacing: 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_membership() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(point_in_polygon(&sq, 0.5, 0.5));
        assert!(point_in_polygon(&sq, 1.0, 0.5));
        assert!(!point_in_polygon(&sq, 1.5, 0.5));
    }

    #[test]
    fn field_of_view() {
        let s = dense_sensor(0, [0.0, 0.0, 2.0], 0.0, Rect::new(0.0, -5.0, 10.0, 5.0));
        assert!(s.sees([4.0, 0.0, 1.0]));
        assert!(!s.sees([-4.0, 0.0, 1.0]));
        assert!(!s.sees([0.5, 3.0, 1.0]));
        assert!(!s.sees([20.0, 0.0, 1.0]));
    }

    #[test]
    fn square_loop_blanks_meet_areas() {
        let m = square_loop_map();
        for b in &m.blank_regions {
            assert!(m.sensors.iter().any(|s| s.area.intersects(b)));
        }
        // Route points in the middle of each side are observed by exactly one sensor.
        for (x, y) in [(3.0, 0.0), (7.0, 2.0), (4.0, 4.0), (0.0, 2.0)] {
            assert_eq!(m.sensors.iter().filter(|s| m.in_area(s, x, y)).count(), 1);
        }
        // Corners are blank.
        for [x, y] in SQUARE_LOOP_ROUTE {
            assert_eq!(m.sensors.iter().filter(|s| m.in_area(s, x, y)).count(), 0);
        }
        assert_eq!(m.gate_count(), 8);
    }

    #[test]
    fn corridor_layout() {
        let m = corridor_map();
        assert_eq!(m.sensors.len(), 4);
        assert_eq!(m.gate_count(), 12);
        assert!(m.in_blank(10.0, 1.5));
        assert!(m.sensors.iter().all(|s| s.sees([s.position[0] + 3.0, 1.0, 1.0])));
    }
}
