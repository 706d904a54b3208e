// SPDX-License-Identifier: Apache-2.0

//! Random sub-trajectories and scoring models shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajlink::embedding::EmbeddingNet;
use trajlink::features::GmmGrid;
use trajlink::geometry::{HumanSegment, Point3};
use trajlink::matcher::{Factors, ModelBundle, P1Mode};
use trajlink::spatiotemporal::{TransitionMatrix, TravelParams, TravelTimeModel};
use trajlink::tracker::SubTrajectory;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn body_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    let (cx, cy) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let h = rng.random_range(1.4..2.0);
    (0..n)
        .map(|_| {
            Point3::new(cx + rng.random_range(-0.3..0.3), cy + rng.random_range(-0.3..0.3), rng.random_range(0.0..h))
        })
        .collect()
}

pub fn random_sub(rng: &mut ChaCha8Rng, id: u64, gates: usize, horizon: f64) -> SubTrajectory<f64> {
    let t_start = rng.random_range(0.0..horizon);
    let t_end = t_start + rng.random_range(1.0..20.0);
    let gate = |rng: &mut ChaCha8Rng| rng.random_bool(0.85).then(|| rng.random_range(0..gates as u32));
    let mut segments = Vec::new();
    if rng.random_bool(0.9) {
        for k in 0..rng.random_range(1..4) {
            let n = rng.random_range(20..80);
            segments.push(HumanSegment::new(0, t_start + k as f64 * 0.1, body_points(rng, n)).unwrap());
        }
    }
    SubTrajectory {
        id,
        sensor_id: rng.random_range(0..4),
        t_start,
        t_end,
        start_gate: gate(rng),
        end_gate: gate(rng),
        samples: vec![[t_start, 0.0, 0.0], [t_end, 1.0, 0.0]],
        segments,
    }
}

pub fn random_bundle(rng: &mut ChaCha8Rng, gates: usize, mode: P1Mode) -> ModelBundle<f64> {
    let counts = (0..gates).map(|_| (0..gates).map(|_| rng.random_range(0.0..20.0)).collect()).collect();
    let mut travel = TravelTimeModel::uniform(TravelParams::default());
    for _ in 0..rng.random_range(0..6) {
        let pair = (rng.random_range(0..gates as u32), rng.random_range(0..gates as u32));
        let mean = rng.random_range(2.0..60.0);
        let dts: Vec<f64> = (0..rng.random_range(1..12)).map(|_| mean + rng.random_range(-1.5..1.5)).collect();
        travel = travel.update_temporal(pair, &dts);
    }
    ModelBundle {
        grid: GmmGrid::regular([3, 3, 6], 0.25, 2.0),
        net: (mode == P1Mode::Fv).then(|| EmbeddingNet::new(&[1080, 32, 16], rng)),
        transitions: TransitionMatrix::from_counts(counts),
        travel,
        p1_mode: mode,
        sigma_h: rng.random_range(0.02..0.2),
        factors: Factors::ALL,
    }
}
