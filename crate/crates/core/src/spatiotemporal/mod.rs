// SPDX-License-Identifier: Apache-2.0

//! Spatial and temporal transition statistics between sensors: virtual
//! gates, the gate transition matrix (P2), travel-time densities (P3) and
//! the high-confidence transitions used to update both.

mod confidence;
mod gate;
mod state;
mod transition;
mod travel_time;

pub use confidence::{detect_high_confidence, detect_transitions, gate_events, EventKind, GateEvent, HighConfidence};
pub use gate::{point_segment_distance, Gate, GateId};
pub use state::{PairRecord, SpatiotemporalState};
pub use transition::TransitionMatrix;
pub use travel_time::{conjugate_posterior, InvGamma, PairState, TravelDensity, TravelParams, TravelTimeModel};
