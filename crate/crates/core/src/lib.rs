// SPDX-License-Identifier: Apache-2.0

//! Filtering of a hidden two-state process, its continuum limit, the
//! continuously monitored qubit, and the spike statistics common to all three.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod ensemble;
mod error;
pub mod grid;
pub mod path;
pub mod qubit;
pub mod rng;
pub mod sde;
pub mod spikes;

pub use ensemble::{run_ensemble, EnsembleSpec};
pub use error::{Error, Result};
pub use grid::{make_time_grid, TimeGrid};
pub use path::ScalarPath;
pub use rng::{RngStream, StreamSpec};
pub use spikes::{DetectionThresholds, RectDomain, SpikeEvent};
