// SPDX-License-Identifier: Apache-2.0

//! Linking of per-sensor pedestrian sub-trajectories from non-overlapping
//! LiDARs into whole-person trajectories.
//!
//! Every numeric module is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases at the crate root name the common instantiations.

pub mod assignment;
pub mod config;
pub mod embedding;
pub mod error;
pub mod features;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod matcher;
pub mod scalar;
pub mod simulator;
pub mod spatiotemporal;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point64 = geometry::Point3<f64>;
pub type Point32 = geometry::Point3<f32>;
pub type Frame64 = geometry::Frame<f64>;
pub type Frame32 = geometry::Frame<f32>;
pub type HumanSegment64 = geometry::HumanSegment<f64>;
pub type HumanSegment32 = geometry::HumanSegment<f32>;
pub type SubTrajectory64 = tracker::SubTrajectory<f64>;
pub type SubTrajectory32 = tracker::SubTrajectory<f32>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type GmmGrid64 = features::GmmGrid<f64>;
pub type GmmGrid32 = features::GmmGrid<f32>;
pub type EmbeddingNet64 = embedding::EmbeddingNet<f64>;
pub type EmbeddingNet32 = embedding::EmbeddingNet<f32>;
pub type TransitionMatrix64 = spatiotemporal::TransitionMatrix<f64>;
pub type TravelTimeModel64 = spatiotemporal::TravelTimeModel<f64>;
pub type MatchResult64 = matcher::MatchResult<f64>;
pub type ModelBundle64 = matcher::ModelBundle<f64>;
