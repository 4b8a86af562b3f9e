// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::path::ScalarPath;
use crate::spikes::{detect, DetectionThresholds};

/// Complete jumps of a `Q` path under both counting conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpCount {
    pub total: u64,
    pub up: u64,
    pub down: u64,
    pub times: Vec<f64>,
    pub duration: f64,
}

impl JumpCount {
    /// Jumps in either direction per unit time.
    pub fn total_rate(&self) -> f64 {
        self.total as f64 / self.duration
    }

    /// Half the total rate: the rate of leaving a given plateau.
    pub fn per_direction_rate(&self) -> f64 {
        0.5 * self.total_rate()
    }
}

pub fn count_complete_jumps(q: &ScalarPath, thresholds: &DetectionThresholds) -> Result<JumpCount> {
    let det = detect(q, thresholds)?;
    let up = det.jumps.iter().filter(|j| j.from == 0).count() as u64;
    let down = det.jumps.len() as u64 - up;
    Ok(JumpCount { total: up + down, up, down, times: det.jump_times(), duration: q.grid.t_end() - q.grid.t0() })
}
