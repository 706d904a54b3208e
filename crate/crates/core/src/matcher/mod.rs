// SPDX-License-Identifier: Apache-2.0

//! Affinity scoring and optimal linking of sub-trajectories, in batch and
//! over a stream.

mod affinity;
mod graph;
mod online;

pub use affinity::{affinity_product, Factors, ModelBundle, P1Mode, Signature};
pub use graph::{
    assemble_sequences, build_graph, build_graph_with, greedy_matching, solve_matching, total_affinity, AffinityGraph,
    MatchResult, DEFAULT_TAU_NOMATCH,
};
pub use online::{match_online, OnlineMatcher, WindowConfig};
