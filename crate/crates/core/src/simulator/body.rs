// SPDX-License-Identifier: Apache-2.0

//! Articulated body built from an elliptic torso, a head sphere and two
//! swinging leg ellipsoids, sampled on its sensor-facing surface.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyModel {
    pub person_id: u32,
    /// Crown height (m).
    pub height: f64,
    pub shoulder_width: f64,
    /// Front-to-back half depth of the torso.
    pub torso_depth: f64,
    pub head_radius: f64,
    /// Hip height as a fraction of `height`.
    pub leg_fraction: f64,
    /// Half width of each leg.
    pub leg_width: f64,
    /// Peak fore-aft foot swing (m).
    pub gait_amplitude: f64,
    /// Steps per second.
    pub gait_frequency: f64,
    /// Mean walking speed (m/s).
    pub speed: f64,
}

impl BodyModel {
    /// Draws a body from seeded population distributions.
    pub fn sample(seed: u64, person_id: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_B0D1);
        rng.set_stream(person_id as u64 + 1);
        let n = |rng: &mut ChaCha8Rng, mu: f64, sd: f64, lo: f64, hi: f64| {
            (mu + sd * Distribution::<f64>::sample(&StandardNormal, rng)).clamp(lo, hi)
        };
        let height = n(&mut rng, 1.70, 0.09, 1.45, 1.98);
        let build = n(&mut rng, 1.0, 0.12, 0.75, 1.3);
        Self {
            person_id,
            height,
            shoulder_width: (0.24 * height * build).clamp(0.32, 0.58),
            torso_depth: n(&mut rng, 0.12, 0.025, 0.08, 0.18) * build,
            head_radius: n(&mut rng, 0.105, 0.008, 0.09, 0.125),
            leg_fraction: n(&mut rng, 0.48, 0.02, 0.43, 0.53),
            leg_width: n(&mut rng, 0.075, 0.012, 0.05, 0.10) * build.sqrt(),
            gait_amplitude: n(&mut rng, 0.25, 0.05, 0.12, 0.38),
            gait_frequency: n(&mut rng, 0.9, 0.08, 0.7, 1.1),
            speed: rng.random_range(1.0..1.5),
        }
    }

    pub fn hip_height(&self) -> f64 {
        self.leg_fraction * self.height
    }

    pub fn shoulder_height(&self) -> f64 {
        self.height - 2.0 * self.head_radius - 0.06
    }

    /// World-frame surface primitives at position `xy`, heading `theta` and gait phase `phase`.
    pub fn pose(&self, xy: [f64; 2], theta: f64, phase: f64) -> Pose {
        let (c, s) = (theta.cos(), theta.sin());
        let fwd = [c, s];
        let left = [-s, c];
        let hip = self.hip_height();
        let sh = self.shoulder_height();
        let half_w = 0.5 * self.shoulder_width;
        let mut parts = Vec::with_capacity(5);
        for (side, sign) in [(1.0, 1.0), (-1.0, -1.0)] {
            let swing = sign * self.gait_amplitude * phase.sin();
            let lat = side * (0.5 * half_w).max(self.leg_width * 1.1);
            parts.push(Primitive::Ellipsoid {
                center: [
                    xy[0] + 0.5 * swing * fwd[0] + lat * left[0],
                    xy[1] + 0.5 * swing * fwd[1] + lat * left[1],
                    0.5 * hip,
                ],
                axes: [0.08, self.leg_width, 0.5 * hip],
                theta,
                tilt: (0.5 * swing / hip).atan(),
            });
        }
        parts.push(Primitive::EllipticCylinder {
            center: [xy[0], xy[1]],
            z0: hip,
            z1: sh,
            axes: [self.torso_depth, half_w],
            theta,
        });
        parts.push(Primitive::Ellipsoid {
            center: [xy[0], xy[1], sh],
            axes: [self.torso_depth, half_w, 0.06],
            theta,
            tilt: 0.0,
        });
        parts.push(Primitive::Ellipsoid {
            center: [xy[0], xy[1], self.height - self.head_radius],
            axes: [self.head_radius; 3],
            theta,
            tilt: 0.0,
        });
        Pose { parts }
    }
}

#[derive(Clone, Debug)]
pub enum Primitive {
    /// Axes are (forward, lateral, vertical); `tilt` pitches forward about the lateral axis.
    Ellipsoid { center: [f64; 3], axes: [f64; 3], theta: f64, tilt: f64 },
    /// Side wall of a vertical elliptic cylinder.
    EllipticCylinder { center: [f64; 2], z0: f64, z1: f64, axes: [f64; 2], theta: f64 },
}

fn ellipsoid_area(a: [f64; 3]) -> f64 {
    let p = 1.6075;
    let t = ((a[0] * a[1]).powf(p) + (a[0] * a[2]).powf(p) + (a[1] * a[2]).powf(p)) / 3.0;
    4.0 * PI * t.powf(1.0 / p)
}

fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let h = ((a - b) / (a + b)).powi(2);
    PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match *self {
            Self::Ellipsoid { axes, .. } => ellipsoid_area(axes),
            Self::EllipticCylinder { z0, z1, axes, .. } => ellipse_perimeter(axes[0], axes[1]) * (z1 - z0).max(0.0),
        }
    }

    /// Surface point and outward normal. Sampling is uniform in the
    /// parameterisation, which is close enough to uniform area for these shapes.
    fn sample<R: Rng>(&self, rng: &mut R) -> ([f64; 3], [f64; 3]) {
        match *self {
            Self::Ellipsoid { center, axes, theta, tilt } => {
                let u: [f64; 3] = loop {
                    let g: [f64; 3] =
                        [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
                    let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                    if n > 1e-12 {
                        break [g[0] / n, g[1] / n, g[2] / n];
                    }
                };
                let local = [axes[0] * u[0], axes[1] * u[1], axes[2] * u[2]];
                let normal = [u[0] / axes[0], u[1] / axes[1], u[2] / axes[2]];
                let (p, n) = (rotate(local, theta, tilt), rotate(normal, theta, tilt));
                ([center[0] + p[0], center[1] + p[1], center[2] + p[2]], n)
            }
            Self::EllipticCylinder { center, z0, z1, axes, theta } => {
                let phi = rng.random_range(0.0..2.0 * PI);
                let z = rng.random_range(z0..z1);
                let local = [axes[0] * phi.cos(), axes[1] * phi.sin(), 0.0];
                let normal = [phi.cos() / axes[0], phi.sin() / axes[1], 0.0];
                let (p, n) = (rotate(local, theta, 0.0), rotate(normal, theta, 0.0));
                ([center[0] + p[0], center[1] + p[1], z], n)
            }
        }
    }
}

fn rotate(v: [f64; 3], theta: f64, tilt: f64) -> [f64; 3] {
    // Pitch about the lateral (y) axis, then yaw about z.
    let (ct, st) = (tilt.cos(), tilt.sin());
    let x = ct * v[0] + st * v[2];
    let z = -st * v[0] + ct * v[2];
    let (c, s) = (theta.cos(), theta.sin());
    [c * x - s * v[1], s * x + c * v[1], z]
}

#[derive(Clone, Debug)]
pub struct Pose {
    pub parts: Vec<Primitive>,
}

impl Pose {
    /// Draws up to `n` surface points facing `viewer`, with radial range noise.
    pub fn sample_visible<R: Rng>(&self, viewer: [f64; 3], n: usize, range_noise: f64, rng: &mut R) -> Vec<[f64; 3]> {
        let areas: Vec<f64> = self.parts.iter().map(Primitive::area).collect();
        let total: f64 = areas.iter().sum();
        let noise = Normal::new(0.0, range_noise.max(0.0)).expect("finite noise");
        let mut out = Vec::with_capacity(n);
        // Roughly half of all draws face away; bound the work regardless.
        for _ in 0..n * 6 {
            if out.len() == n {
                break;
            }
            let mut pick = rng.random_range(0.0..total);
            let mut k = 0;
            while k + 1 < areas.len() && pick >= areas[k] {
                pick -= areas[k];
                k += 1;
            }
            let (p, normal) = self.parts[k].sample(rng);
            let view = [viewer[0] - p[0], viewer[1] - p[1], viewer[2] - p[2]];
            if normal[0] * view[0] + normal[1] * view[1] + normal[2] * view[2] <= 0.0 {
                continue;
            }
            let r = (view[0] * view[0] + view[1] * view[1] + view[2] * view[2]).sqrt();
            let e = if range_noise > 0.0 { noise.sample(rng) } else { 0.0 };
            let k = -e / r;
            out.push([p[0] + k * view[0], p[1] + k * view[1], (p[2] + k * view[2]).max(0.0)]);
        }
        out
    }
}
