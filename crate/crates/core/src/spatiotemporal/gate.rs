// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::geometry::SensorId;
use crate::scalar::Real;

pub type GateId = u32;

/// A boundary segment of a sensor's trajectory area through which people
/// enter or leave it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Gate<T> {
    pub id: GateId,
    pub sensor_id: SensorId,
    pub segment: [[T; 2]; 2],
}

impl<T: Real> Gate<T> {
    pub fn new(id: GateId, sensor_id: SensorId, a: [T; 2], b: [T; 2]) -> Self {
        Self { id, sensor_id, segment: [a, b] }
    }

    pub fn distance_to(&self, p: [T; 2]) -> T {
        point_segment_distance(p, self.segment[0], self.segment[1])
    }

    pub fn midpoint(&self) -> [T; 2] {
        let half = T::lit(0.5);
        [(self.segment[0][0] + self.segment[1][0]) * half, (self.segment[0][1] + self.segment[1][1]) * half]
    }
}

pub fn point_segment_distance<T: Real>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > T::zero() {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let (qx, qy) = (a[0] + s * dx - p[0], a[1] + s * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_to_segment() {
        let g = Gate::new(0, 0, [0.0, 0.0], [2.0, 0.0]);
        assert_eq!(g.distance_to([1.0, 0.5]), 0.5);
        assert_eq!(g.distance_to([3.0, 0.0]), 1.0);
        assert_eq!(g.distance_to([-3.0, 4.0]), 5.0);
        assert_eq!(g.midpoint(), [1.0, 0.0]);
    }
}
