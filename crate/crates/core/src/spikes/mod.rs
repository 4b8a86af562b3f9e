// SPDX-License-Identifier: Apache-2.0

//! Plateaus, spikes and complete jumps of a probability path, and the
//! statistics of the spike point process.
//!
//! On a plateau the spikes with apex in `[t_lo, t_hi) x [Q_lo, Q_hi)` form a
//! Poisson process with intensity `k / Q^2`, so the expected count is
//! `k (t_hi - t_lo)(1/Q_lo - 1/Q_hi)`.

mod detect;
mod inference;
mod laws;
pub mod stats;
mod thresholds;

pub use detect::{
    detect, events_to_json, extract_spikes, segment_plateaus, write_events_csv, Detection, EventPool, Jump,
    PlateauTracker, Segment, Segmentation, SpikeEvent,
};
pub use inference::{
    band_shape_test, count_excursions, fit_prefactor, max_law_test, poisson_test, predicted_wrong_probability,
    scale_invariance_test, spikelessness_comparison, wrong_prediction_probability, BandRecord, ChiSquare, DomainRecord,
    IndependenceCheck, MaxLawReport, PoissonReport, PrefactorFit, ScaleReport, ShapeReport, SpikelessReport,
    SurvivalPoint, WrongPredictionMonitor, WrongPredictionReport, INDEPENDENCE_WINDOWS, MIN_MAX_LAW_EVENTS,
};
pub use laws::{expected_count, RectDomain};
pub use thresholds::{DetectionThresholds, HIERARCHY_FACTOR};
