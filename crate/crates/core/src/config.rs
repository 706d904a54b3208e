// SPDX-License-Identifier: Apache-2.0

//! Run configuration, one TOML section per module. Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::TrainConfig;
use crate::error::Result;
use crate::features::GmmGrid;
use crate::geometry::{
    DEFAULT_BACKGROUND_VOXEL, DEFAULT_DBSCAN_EPS, DEFAULT_DBSCAN_MIN_PTS, DEFAULT_OCCUPANCY_FRACTION,
};
use crate::matcher::{P1Mode, WindowConfig, DEFAULT_TAU_NOMATCH};
use crate::spatiotemporal::TravelParams;
use crate::tracker::TrackerParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub background_voxel: f64,
    pub occupancy_fraction: f64,
    pub calibration_frames: usize,
    /// Foreground voxel filter cell.
    pub downsample_cell: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Endpoint-to-gate snapping distance.
    pub gate_delta: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            background_voxel: DEFAULT_BACKGROUND_VOXEL,
            occupancy_fraction: DEFAULT_OCCUPANCY_FRACTION,
            calibration_frames: 20,
            downsample_cell: 0.05,
            dbscan_eps: DEFAULT_DBSCAN_EPS,
            dbscan_min_pts: DEFAULT_DBSCAN_MIN_PTS,
            gate_delta: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub grid_shape: [usize; 3],
    pub sigma: f64,
    pub body_height: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { grid_shape: [3, 3, 6], sigma: 0.25, body_height: 2.0 }
    }
}

impl FeatureConfig {
    pub fn grid(&self) -> GmmGrid<f64> {
        GmmGrid::regular(self.grid_shape, self.sigma, self.body_height)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatiotemporalConfig {
    /// Initial count in every transition cell.
    pub pseudo_count: f64,
    pub travel: TravelParams<f64>,
    /// Longest gap (s) between an exit and an entry for a high-confidence transition.
    pub confidence_window: f64,
}

impl Default for SpatiotemporalConfig {
    fn default() -> Self {
        Self { pseudo_count: 1.0, travel: TravelParams::default(), confidence_window: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    pub tau: f64,
    pub p1: P1Mode,
    pub sigma_h: f64,
    pub window: WindowConfig<f64>,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU_NOMATCH, p1: P1Mode::Fv, sigma_h: 0.05, window: WindowConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Distinct people used only for training the embedding.
    pub training_subjects: usize,
    pub enrollment_laps: f64,
    /// Keep every n-th tracked segment as a training sample.
    pub training_stride: usize,
    /// Ground-truth association radius for labelling (m).
    pub label_radius: f64,
    pub exp1a_subjects: Vec<usize>,
    pub exp1b_subjects: usize,
    pub exp1b_intervals: Vec<f64>,
    pub exp1c_subjects: usize,
    pub pre_post_subjects: usize,
    pub interval: f64,
    pub corridor_days: u32,
    pub corridor_day_seconds: f64,
    /// Pedestrian arrivals per second.
    pub corridor_rate: f64,
    /// Stream seconds between distribution updates.
    pub update_every: f64,
    pub histogram_bins: usize,
    /// Train an embedding when fv similarity is requested without a model file.
    pub train_if_missing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            training_subjects: 48,
            enrollment_laps: 1.0,
            training_stride: 2,
            label_radius: 0.6,
            exp1a_subjects: vec![2, 4, 8, 16, 32],
            exp1b_subjects: 4,
            exp1b_intervals: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            exp1c_subjects: 4,
            pre_post_subjects: 4,
            interval: 10.0,
            corridor_days: 5,
            corridor_day_seconds: 600.0,
            corridor_rate: 0.08,
            update_every: 60.0,
            histogram_bins: 20,
            train_if_missing: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    /// Apply learned spatial and temporal distributions.
    pub update: Option<bool>,
    pub segmentation: SegmentationConfig,
    pub tracker: TrackerParams<f64>,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub spatiotemporal: SpatiotemporalConfig,
    pub matcher: MatcherConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
