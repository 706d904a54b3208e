// SPDX-License-Identifier: Apache-2.0

//! Metric embedding of Fisher Vector signatures and the appearance
//! similarity derived from it.

mod model_file;
mod net;
mod similarity;
mod train;

pub use model_file::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use net::{EmbeddingNet, Forward, Gradient, Layer, DEFAULT_LAYER_SIZES};
pub use similarity::{
    cosine, height_similarity, mean_embedding, p1_height, p1_similarity, percentile, segment_height,
    similarity_from_cosine, track_embedding, track_height, triplet_loss,
};
pub use train::{
    batch_loss, batch_loss_and_gradient, sample_triplets, train, TrainConfig, TrainReport, TrainingSet, Triplet,
};
