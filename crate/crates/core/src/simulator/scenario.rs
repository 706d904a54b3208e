// SPDX-License-Identifier: Apache-2.0

//! Who walks where and when.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::body::BodyModel;
use super::map::{DensityProfile, CORRIDOR_DOORS, CORRIDOR_LENGTH, CORRIDOR_WIDTH, SQUARE_LOOP_ROUTE};
use crate::error::{Error, Result};

/// Subject counts supported by the crowding sweep.
pub const SUPPORTED_SUBJECTS: [usize; 5] = [2, 4, 8, 16, 32];
/// Seconds each subject of a loop scenario keeps walking.
pub const DEFAULT_WALK_TIME: f64 = 60.0;
pub const TICK: f64 = 0.1;

/// One pedestrian's body and itinerary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectPlan {
    pub body: BodyModel,
    pub route: Vec<[f64; 2]>,
    /// Closed routes wrap from the last waypoint to the first.
    pub closed: bool,
    pub start: f64,
    /// Walking time for closed routes; open routes end at their last waypoint.
    #[serde(default)]
    pub walk_time: Option<f64>,
    /// Sideways offset from the route centre line, positive to the left.
    #[serde(default)]
    pub lateral_offset: f64,
}

/// Kinematic state of a walking subject.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkState {
    pub xy: [f64; 2],
    pub heading: f64,
    pub phase: f64,
}

impl SubjectPlan {
    fn legs(&self) -> Vec<([f64; 2], [f64; 2], f64)> {
        let n = self.route.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count)
            .map(|i| {
                let (a, b) = (self.route[i], self.route[(i + 1) % n]);
                (a, b, (b[0] - a[0]).hypot(b[1] - a[1]))
            })
            .filter(|l| l.2 > 0.0)
            .collect()
    }

    pub fn route_length(&self) -> f64 {
        self.legs().iter().map(|l| l.2).sum()
    }

    /// Distance walked after `tau` seconds; the sinusoid is gait speed jitter.
    fn arclength(&self, tau: f64) -> f64 {
        let f = self.body.gait_frequency;
        let amp = 0.03;
        self.body.speed * tau + amp * (std::f64::consts::PI * f * tau).sin().powi(2)
    }

    pub fn end_time(&self) -> f64 {
        match self.walk_time {
            Some(w) if self.closed => self.start + w,
            _ if self.closed => f64::INFINITY,
            _ => self.start + self.route_length() / self.body.speed,
        }
    }

    /// Position at time `t`, or `None` before the start or after the end.
    pub fn state(&self, t: f64) -> Option<WalkState> {
        if t < self.start || t >= self.end_time() {
            return None;
        }
        let legs = self.legs();
        let total: f64 = legs.iter().map(|l| l.2).sum();
        if legs.is_empty() || total <= 0.0 {
            return None;
        }
        let tau = t - self.start;
        let mut s = self.arclength(tau);
        if self.closed {
            s %= total;
        } else if s >= total {
            return None;
        }
        for &(a, b, len) in &legs {
            if s <= len {
                let u = s / len;
                let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
                let left = [-dir[1], dir[0]];
                return Some(WalkState {
                    xy: [
                        a[0] + u * (b[0] - a[0]) + self.lateral_offset * left[0],
                        a[1] + u * (b[1] - a[1]) + self.lateral_offset * left[1],
                    ],
                    heading: dir[1].atan2(dir[0]),
                    phase: 2.0 * std::f64::consts::PI * self.body.gait_frequency * tau,
                });
            }
            s -= len;
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    /// Delay between consecutive subject starts (s).
    pub interval: f64,
    /// Simulated seconds.
    pub duration: f64,
    pub profile: DensityProfile,
    pub subjects: Vec<SubjectPlan>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval >= 0.0) {
            return Err(Error::Invalid(format!("interval must be non-negative, got {}", self.interval)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::Invalid(format!("duration must be finite and non-negative, got {}", self.duration)));
        }
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        (self.duration / TICK).round() as u64
    }
}

/// Draws `n` distinct bodies.
pub fn population(seed: u64, n: usize) -> Vec<BodyModel> {
    (0..n as u32).map(|id| BodyModel::sample(seed, id)).collect()
}

fn lateral_offset(seed: u64, person_id: u32) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1A7E_5A1D);
    rng.set_stream(person_id as u64 + 1);
    rng.random_range(-0.25..0.25)
}

/// Loop walk with staggered starts on the square testbed.
pub fn loop_scenario(bodies: &[BodyModel], interval: f64, walk_time: f64, seed: u64) -> ScenarioSpec {
    let subjects: Vec<SubjectPlan> = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| SubjectPlan {
            body: b.clone(),
            route: SQUARE_LOOP_ROUTE.to_vec(),
            closed: true,
            start: i as f64 * interval,
            walk_time: Some(walk_time),
            lateral_offset: lateral_offset(seed, b.person_id),
        })
        .collect();
    let last = subjects.iter().map(|s| s.start).fold(0.0, f64::max);
    ScenarioSpec {
        name: format!("loop-{}x{}s", bodies.len(), interval),
        seed,
        interval,
        duration: last + walk_time + 1.0,
        profile: DensityProfile::Dense,
        subjects,
    }
}

/// `n` subjects from the seeded population walking the loop, starting `interval` s apart.
pub fn scenario_1a(n_subjects: usize, interval: f64, seed: u64) -> Result<ScenarioSpec> {
    if !SUPPORTED_SUBJECTS.contains(&n_subjects) {
        return Err(Error::UnsupportedSubjects(n_subjects));
    }
    if !(interval >= 0.0) {
        return Err(Error::Invalid(format!("interval must be non-negative, got {interval}")));
    }
    Ok(loop_scenario(&population(seed, n_subjects), interval, DEFAULT_WALK_TIME, seed))
}

/// Each body walks the loop alone for `laps` laps; used to collect labelled
/// training segments.
pub fn enrollment_scenario(bodies: &[BodyModel], laps: f64, seed: u64) -> ScenarioSpec {
    let perimeter: f64 = (0..SQUARE_LOOP_ROUTE.len())
        .map(|i| {
            let (a, b) = (SQUARE_LOOP_ROUTE[i], SQUARE_LOOP_ROUTE[(i + 1) % SQUARE_LOOP_ROUTE.len()]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum();
    let mut t = 0.0;
    let mut subjects = Vec::with_capacity(bodies.len());
    for b in bodies {
        // Walk on past the start so the last track ends inside an area, not on a gate.
        let walk = (laps * perimeter + 2.5) / b.speed;
        subjects.push(SubjectPlan {
            body: b.clone(),
            route: SQUARE_LOOP_ROUTE.to_vec(),
            closed: true,
            start: t,
            walk_time: Some(walk),
            lateral_offset: lateral_offset(seed, b.person_id),
        });
        t += walk + 5.0;
    }
    ScenarioSpec {
        name: "enrollment".into(),
        seed,
        interval: 0.0,
        duration: t,
        profile: DensityProfile::Dense,
        subjects,
    }
}

/// Poisson pedestrian traffic through the corridor for one day of `duration` seconds.
///
/// People enter at either end or a side door and leave at a different one,
/// walking right along y = 1 and left along y = 2.
pub fn corridor_traffic(day: u32, duration: f64, rate: f64, seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC022_1D0E);
    rng.set_stream(day as u64 + 1);
    let arrivals = Exp::new(rate.max(1e-9)).expect("positive rate");
    // Portals: 0 = west end, 1 = east end, 2.. = doors.
    let portals: Vec<(f64, Option<u8>)> = [(-0.5, None), (CORRIDOR_LENGTH + 0.5, None)]
        .into_iter()
        .chain(CORRIDOR_DOORS.iter().map(|&(x, w)| (x, Some(w))))
        .collect();
    let portal_xy = |p: (f64, Option<u8>)| match p.1 {
        None => [p.0, 1.5],
        Some(0) => [p.0, -0.5],
        Some(_) => [p.0, CORRIDOR_WIDTH + 0.5],
    };
    let mut subjects = Vec::new();
    let mut t = arrivals.sample(&mut rng);
    let mut k = 0u32;
    while t < duration - 5.0 {
        // Ends are busier than doors.
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.6) {
                rng.random_range(0..2)
            } else {
                rng.random_range(2..portals.len())
            }
        };
        let from = pick(&mut rng);
        let to = loop {
            let c = pick(&mut rng);
            if c != from && (portals[c].0 - portals[from].0).abs() > 2.0 {
                break c;
            }
        };
        let (a, b) = (portals[from], portals[to]);
        let lane = if b.0 > a.0 { 1.0 } else { 2.0 };
        let mut route = vec![portal_xy(a)];
        route.push([a.0, lane]);
        route.push([b.0, lane]);
        route.push(portal_xy(b));
        route.dedup_by(|p, q| (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-9);
        let person_id = day * 100_000 + k;
        subjects.push(SubjectPlan {
            body: BodyModel::sample(seed, person_id),
            route,
            closed: false,
            start: t,
            walk_time: None,
            lateral_offset: rng.random_range(-0.2..0.2),
        });
        k += 1;
        t += arrivals.sample(&mut rng);
    }
    let end = subjects.iter().map(SubjectPlan::end_time).fold(duration, f64::max);
    ScenarioSpec {
        name: format!("corridor-day{day}"),
        seed,
        interval: 0.0,
        duration: end + 1.0,
        profile: DensityProfile::Sparse,
        subjects,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_1a_staggers_starts() {
        let s = scenario_1a(4, 10.0, 1).unwrap();
        let starts: Vec<f64> = s.subjects.iter().map(|p| p.start).collect();
        assert_eq!(starts, vec![0.0, 10.0, 20.0, 30.0]);
        let s = scenario_1a(2, 0.0, 1).unwrap();
        assert!(s.subjects.iter().all(|p| p.start == 0.0));
        assert!(matches!(scenario_1a(5, 10.0, 1), Err(Error::UnsupportedSubjects(5))));
        assert!(scenario_1a(4, -1.0, 1).is_err());
    }

    #[test]
    fn thirty_two_distinct_bodies() {
        let s = scenario_1a(32, 10.0, 7).unwrap();
        for i in 0..32 {
            for j in i + 1..32 {
                assert_ne!(s.subjects[i].body, s.subjects[j].body);
            }
        }
    }

    #[test]
    fn loop_walk_stays_on_route() {
        let s = scenario_1a(2, 0.0, 3).unwrap();
        let p = &s.subjects[0];
        for k in 0..600 {
            let st = p.state(k as f64 * 0.1).unwrap();
            let off = p.lateral_offset.abs() + 1e-9;
            let on_side = st.xy[1].abs() <= off
                || (st.xy[1] - 4.0).abs() <= off
                || st.xy[0].abs() <= off
                || (st.xy[0] - 7.0).abs() <= off;
            assert!(on_side, "{:?}", st.xy);
        }
        assert!(p.state(60.0).is_none());
        assert!(p.state(-0.1).is_none());
    }

    #[test]
    fn open_route_ends() {
        let mut body = BodyModel::sample(0, 0);
        body.speed = 1.25;
        let p = SubjectPlan {
            body,
            route: vec![[0.0, 0.0], [5.0, 0.0]],
            closed: false,
            start: 0.0,
            walk_time: None,
            lateral_offset: 0.0,
        };
        assert!((p.end_time() - 4.0).abs() < 1e-12);
        assert!(p.state(3.9).is_some());
        assert!(p.state(4.2).is_none());
    }

    #[test]
    fn corridor_traffic_is_seeded() {
        let a = corridor_traffic(1, 600.0, 0.1, 5);
        assert_eq!(a, corridor_traffic(1, 600.0, 0.1, 5));
        assert!(a.subjects.len() > 20);
        assert_ne!(a.subjects, corridor_traffic(2, 600.0, 0.1, 5).subjects);
    }
}
