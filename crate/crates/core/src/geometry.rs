// SPDX-License-Identifier: Apache-2.0

//! Point-cloud containers and the per-frame segmentation pipeline:
//! background subtraction, voxel grid downsampling and DBSCAN over the
//! floor-plane projection.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cmp_real, Real};

pub type SensorId = u32;

/// Default voxel edge of the background occupancy grid, meters.
pub const DEFAULT_BACKGROUND_VOXEL: f64 = 0.10;
/// A voxel is background when occupied in at least this fraction of calibration frames.
pub const DEFAULT_OCCUPANCY_FRACTION: f64 = 0.5;
pub const DEFAULT_DBSCAN_EPS: f64 = 0.35;
pub const DEFAULT_DBSCAN_MIN_PTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound = "T: Real")]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Lexicographic (x, y, z) order.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        cmp_real(&self.x, &other.x).then_with(|| cmp_real(&self.y, &other.y)).then_with(|| cmp_real(&self.z, &other.z))
    }

    pub fn xy_dist2(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl<T: Copy> From<[T; 3]> for Point3<T> {
    fn from(v: [T; 3]) -> Self {
        Self { x: v[0], y: v[1], z: v[2] }
    }
}

impl<T> From<Point3<T>> for [T; 3] {
    fn from(p: Point3<T>) -> Self {
        [p.x, p.y, p.z]
    }
}

/// One scan of a sensor's scan space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Frame<T> {
    pub sensor_id: SensorId,
    pub t: T,
    pub points: Vec<Point3<T>>,
}

/// A clustered point cloud believed to be one person in one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HumanSegment<T> {
    pub sensor_id: SensorId,
    pub t: T,
    pub points: Vec<Point3<T>>,
    pub centroid_xy: [T; 2],
}

impl<T: Real> HumanSegment<T> {
    pub fn new(sensor_id: SensorId, t: T, points: Vec<Point3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySegment);
        }
        let centroid_xy = mean_xy(&points);
        Ok(Self { sensor_id, t, points, centroid_xy })
    }
}

fn mean_xy<T: Real>(points: &[Point3<T>]) -> [T; 2] {
    let n = T::of_usize(points.len());
    let (sx, sy) = points.iter().fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p.x, sy + p.y));
    [sx / n, sy / n]
}

type VoxelKey = [i64; 3];

fn voxel_key<T: Real>(p: &Point3<T>, edge: T) -> VoxelKey {
    [
        (p.x / edge).floor().to_i64().unwrap_or(i64::MAX),
        (p.y / edge).floor().to_i64().unwrap_or(i64::MAX),
        (p.z / edge).floor().to_i64().unwrap_or(i64::MAX),
    ]
}

/// Voxel occupancy model of a static scene.
#[derive(Clone, Debug)]
pub struct BackgroundModel<T> {
    pub sensor_id: SensorId,
    pub voxel_edge: T,
    pub occupancy_fraction: T,
    pub calibration_frames: usize,
    cells: HashSet<VoxelKey>,
}

impl<T: Real> BackgroundModel<T> {
    pub fn is_background(&self, p: &Point3<T>) -> bool {
        self.cells.contains(&voxel_key(p, self.voxel_edge))
    }

    pub fn background_voxels(&self) -> usize {
        self.cells.len()
    }
}

/// Builds a background model from pedestrian-free calibration frames of one sensor.
pub fn build_background<T: Real>(
    frames: &[Frame<T>],
    voxel_edge: T,
    occupancy_fraction: T,
) -> Result<BackgroundModel<T>> {
    let first = frames.first().ok_or(Error::NoCalibrationFrames)?;
    if !(voxel_edge > T::zero()) {
        return Err(Error::InvalidCell(voxel_edge.f64()));
    }
    let mut hits: HashMap<VoxelKey, usize> = HashMap::new();
    for frame in frames {
        if frame.sensor_id != first.sensor_id {
            return Err(Error::MixedSensors(first.sensor_id, frame.sensor_id));
        }
        let occupied: HashSet<VoxelKey> = frame.points.iter().map(|p| voxel_key(p, voxel_edge)).collect();
        for key in occupied {
            *hits.entry(key).or_default() += 1;
        }
    }
    let needed = occupancy_fraction * T::of_usize(frames.len());
    let cells = hits.into_iter().filter(|&(_, n)| T::of_usize(n) >= needed).map(|(k, _)| k).collect();
    Ok(BackgroundModel {
        sensor_id: first.sensor_id,
        voxel_edge,
        occupancy_fraction,
        calibration_frames: frames.len(),
        cells,
    })
}

/// Keeps only the points whose voxel is not background.
pub fn subtract_background<T: Real>(frame: &Frame<T>, model: &BackgroundModel<T>) -> Frame<T> {
    Frame {
        sensor_id: frame.sensor_id,
        t: frame.t,
        points: frame.points.iter().filter(|p| !model.is_background(p)).copied().collect(),
    }
}

/// Voxel grid filter: one centroid per non-empty cell, ordered by cell index.
pub fn voxel_downsample<T: Real>(points: &[Point3<T>], cell: T) -> Result<Vec<Point3<T>>> {
    if !(cell > T::zero()) {
        return Err(Error::InvalidCell(cell.f64()));
    }
    let mut cells: HashMap<VoxelKey, (Point3<T>, usize)> = HashMap::new();
    for p in points {
        let acc = cells.entry(voxel_key(p, cell)).or_insert((Point3::default(), 0));
        acc.0.x = acc.0.x + p.x;
        acc.0.y = acc.0.y + p.y;
        acc.0.z = acc.0.z + p.z;
        acc.1 += 1;
    }
    let mut keyed: Vec<(VoxelKey, Point3<T>)> = cells
        .into_iter()
        .map(|(k, (s, n))| {
            let n = T::of_usize(n);
            (k, Point3::new(s.x / n, s.y / n, s.z / n))
        })
        .collect();
    keyed.sort_unstable_by_key(|a| a.0);
    Ok(keyed.into_iter().map(|(_, p)| p).collect())
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Cluster labels of DBSCAN over the XY projection of `points`.
///
/// Core points (at least `min_pts` neighbours within `eps`, self included) are
/// linked into components; a border point joins the component of its nearest
/// core neighbour, ties going to the lexicographically smallest core point.
/// That rule makes the partition independent of input order. Noise is `None`.
pub fn dbscan_xy<T: Real>(points: &[Point3<T>], eps: T, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let eps2 = eps * eps;
    let cell_of = |p: &Point3<T>| -> (i64, i64) {
        ((p.x / eps).floor().to_i64().unwrap_or(0), (p.y / eps).floor().to_i64().unwrap_or(0))
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }
    let neighbours = |i: usize| -> Vec<usize> {
        let (cx, cy) = cell_of(&points[i]);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| points[i].xy_dist2(&points[j]) <= eps2));
                }
            }
        }
        out
    };
    let hoods: Vec<Vec<usize>> = (0..n).map(neighbours).collect();
    let core: Vec<bool> = hoods.iter().map(|h| h.len() >= min_pts).collect();

    let mut sets = DisjointSet::new(n);
    for i in (0..n).filter(|&i| core[i]) {
        for &j in hoods[i].iter().filter(|&&j| core[j]) {
            sets.union(i, j);
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if core[i] {
            owner[i] = Some(i);
            continue;
        }
        let mut best: Option<usize> = None;
        for &j in hoods[i].iter().filter(|&&j| core[j]) {
            best = match best {
                None => Some(j),
                Some(b) => {
                    let (dj, db) = (points[i].xy_dist2(&points[j]), points[i].xy_dist2(&points[b]));
                    let closer = dj < db || (dj == db && points[j].lex_cmp(&points[b]) == std::cmp::Ordering::Less);
                    Some(if closer { j } else { b })
                }
            };
        }
        owner[i] = best;
    }

    // Relabel components by first appearance so labels are dense.
    let mut dense: HashMap<usize, usize> = HashMap::new();
    owner
        .into_iter()
        .map(|o| {
            o.map(|c| {
                let root = sets.find(c);
                let next = dense.len();
                *dense.entry(root).or_insert(next)
            })
        })
        .collect()
}

/// Splits a foreground, downsampled frame into human segments.
///
/// Clustering ignores z; every segment keeps its full 3D members, sorted
/// lexicographically, and segments are ordered by their smallest member.
pub fn segment_humans<T: Real>(frame: &Frame<T>, eps: T, min_pts: usize) -> Vec<HumanSegment<T>> {
    let labels = dbscan_xy(&frame.points, eps, min_pts);
    let clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<Point3<T>>> = vec![Vec::new(); clusters];
    for (p, label) in frame.points.iter().zip(&labels) {
        if let Some(c) = label {
            groups[*c].push(*p);
        }
    }
    let mut segments: Vec<HumanSegment<T>> = groups
        .into_iter()
        .filter(|g| g.len() >= min_pts.max(1))
        .map(|mut g| {
            g.sort_by(|a, b| a.lex_cmp(b));
            HumanSegment::new(frame.sensor_id, frame.t, g).expect("non-empty cluster")
        })
        .collect();
    segments.sort_by(|a, b| a.points[0].lex_cmp(&b.points[0]));
    segments
}
