// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Minimum ratio `q_exit / (rate / gamma)`.
pub const HIERARCHY_FACTOR: f64 = 50.0;

/// Hysteresis levels of the plateau/spike detector, as distances from the
/// current plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionThresholds {
    /// An excursion starts when the distance exceeds this.
    pub q_enter: f64,
    /// An excursion ends when the distance falls below this.
    pub q_exit: f64,
    /// Reaching distance `1 - jump_level` is a complete jump.
    pub jump_level: f64,
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        Self { q_enter: 0.1, q_exit: 0.02, jump_level: 0.1 }
    }
}

impl DetectionThresholds {
    pub fn new(q_enter: f64, q_exit: f64, jump_level: f64) -> Result<Self> {
        let t = Self { q_enter, q_exit, jump_level };
        t.validate()?;
        Ok(t)
    }

    /// Requires `0 < q_exit < q_enter < 1 - jump_level` and `0 < jump_level < 1/2`.
    ///
    /// The bound on `jump_level` keeps the landing point of a jump closer to
    /// the new plateau than the jump level, so a single crossing cannot count
    /// twice.
    pub fn validate(&self) -> Result<()> {
        let Self { q_enter, q_exit, jump_level } = *self;
        if !(q_exit > 0.0 && q_exit < q_enter && q_enter < 1.0) {
            return Err(invalid(format!(
                "thresholds need 0 < q_exit < q_enter < 1, got q_exit={q_exit}, q_enter={q_enter}"
            )));
        }
        if !(jump_level > 0.0 && jump_level < 0.5) {
            return Err(invalid(format!("jump_level must lie in (0, 1/2), got {jump_level}")));
        }
        if !(q_enter < 1.0 - jump_level) {
            return Err(invalid(format!("q_enter={q_enter} must be below 1 - jump_level={}", 1.0 - jump_level)));
        }
        Ok(())
    }

    /// `q_exit >= 50 * rate / gamma`, where `rate` is the jump-rate parameter
    /// (`lambda_tilde` or `omega^2`).
    pub fn check_hierarchy(&self, rate: f64, gamma: f64) -> Result<()> {
        self.validate()?;
        if !(gamma > 0.0) {
            return Err(invalid("hierarchy check needs gamma > 0"));
        }
        let floor = HIERARCHY_FACTOR * rate / gamma;
        if self.q_exit < floor {
            return Err(invalid(format!("q_exit={} is below the hierarchy floor {floor}", self.q_exit)));
        }
        Ok(())
    }

    /// Distance of `q` from plateau `label`.
    #[inline]
    pub fn distance(label: u8, q: f64) -> f64 {
        if label == 0 {
            q
        } else {
            1.0 - q
        }
    }
}
