// SPDX-License-Identifier: Apache-2.0

//! Pass thresholds of the acceptance criteria.

/// Oracle agreement of filter and smoother.
pub const ORACLE_TOL: f64 = 1e-12;
/// Runtime limit of the oracle comparisons, seconds.
pub const ORACLE_SECONDS: f64 = 5.0;
/// Runtime limit of the mean-law ensemble, seconds.
pub const MEAN_LAW_SECONDS: f64 = 120.0;
/// Runtime limit of the wrong-prediction ensemble, seconds.
pub const WRONG_PREDICTION_SECONDS: f64 = 900.0;
/// Number of standard errors allowed for Monte Carlo means.
pub const SIGMAS: f64 = 3.0;
/// Plateau time the spike runs must accumulate.
pub const MIN_PLATEAU_TIME: f64 = 200.0;
/// Fitted spike prefactor over the nominal rate.
pub const PREFACTOR_BAND: (f64, f64) = (0.4, 1.2);
/// Events needed by the excursion-maximum test.
pub const MIN_MAX_LAW_EVENTS: usize = 500;
pub const MAX_LAW_P: f64 = 0.01;
/// Wrong-prediction probability.
pub const WRONG_PREDICTION_BAND: (f64, f64) = (0.45, 0.55);
/// Jump rate over `omega^2`.
pub const JUMP_RATE_BAND: (f64, f64) = (0.85, 1.15);
/// Relative tolerance on the jump-rate ratio of the scaling check.
pub const JUMP_SCALING_TOL: f64 = 0.2;
/// Final ensemble mean of `det rho`.
pub const FINAL_DET: f64 = 1e-6;
/// Smoothed over filtered excursion count.
pub const SPIKELESS_RATIO: f64 = 0.05;

pub fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}
