// SPDX-License-Identifier: Apache-2.0

//! Experiment orchestration, evaluation and plot data.

pub mod eval;
pub mod experiment;
pub mod pipeline;
pub mod plots;

pub use eval::{auc, evaluate, evaluate_report, AffinityHistogram, EvalReport, GroundTruth, PairScores, TruthRecord};
pub use experiment::{
    apply_samples, base_bundle, high_confidence, labelled_features, match_batch, run_experiment, similarity_auc,
    site_history, train_appearance, Appearance, ExperimentOutput, StreamLearner, TravelCurve, EXPERIMENTS,
    HELD_OUT_SUBJECTS, TRAINING_ID_BASE,
};
pub use pipeline::{label_subtrajectories, renumber, run_scene, Extractor, Scene, TruthIndex};
pub use plots::emit_plots;
