// SPDX-License-Identifier: Apache-2.0

//! Uniform time grids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A uniform grid `t0, t0 + dt, ..., t0 + n_steps * dt`.
///
/// Grid times are always computed as `t0 + k * dt`, never by accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        if !t0.is_finite() {
            return Err(invalid("grid origin must be finite"));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid covering `[0, horizon]` with step `dt`; the step count is `horizon / dt` rounded.
    pub fn covering(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if !(dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let n = (horizon / dt).round();
        if n < 1.0 {
            return Err(invalid(format!("horizon {horizon} shorter than one step {dt}")));
        }
        Self::new(0.0, dt, n as usize)
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Index of the first grid point at or after `t`, saturating at the ends.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        if t <= self.t0 {
            return 0;
        }
        let k = ((t - self.t0) / self.dt).ceil();
        let mut k = if k > self.n_steps as f64 { self.n_steps } else { k as usize };
        // ceil can overshoot by one when t sits on a grid point up to rounding
        if k > 0 && self.time(k - 1) >= t {
            k -= 1;
        }
        k
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.time(k))
    }
}

pub fn make_time_grid(t0: f64, dt: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(t0, dt, n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tenth_steps_end_exactly_at_one() {
        let g = make_time_grid(0.0, 0.1, 10).unwrap();
        assert_eq!(g.t_end(), 1.0);
        assert_eq!(g.len(), 11);
    }

    #[test]
    fn million_micro_steps_end_at_one() {
        let g = make_time_grid(0.0, 1e-6, 1_000_000).unwrap();
        let exact = 1e6 * 1e-6;
        assert!((g.t_end() - exact).abs() <= f64::EPSILON * exact);
        assert!((g.t_end() - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn offset_grid_points() {
        let g = make_time_grid(5.0, 0.5, 2).unwrap();
        let ts: Vec<f64> = g.times().collect();
        assert_eq!(ts, vec![5.0, 5.5, 6.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_time_grid(0.0, 0.0, 10).is_err());
        assert!(make_time_grid(0.0, -1.0, 10).is_err());
        assert!(make_time_grid(0.0, 0.1, 0).is_err());
        assert!(make_time_grid(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn index_lookup() {
        let g = make_time_grid(0.0, 0.1, 10).unwrap();
        assert_eq!(g.index_at_or_after(-1.0), 0);
        assert_eq!(g.index_at_or_after(0.3), 3);
        assert_eq!(g.index_at_or_after(0.31), 4);
        assert_eq!(g.index_at_or_after(7.0), 10);
    }
}
