// SPDX-License-Identifier: Apache-2.0

//! Two-variable form of the master equation for real states.
//!
//! With `Q = <+z|rho|+z>` and `Y = sqrt(gamma) Re <+z|rho|-z>`:
//!
//! ```text
//! dQ = -omega Y dt + 4 sqrt(gamma) Q (1 - Q) dW
//! dY = gamma [ (omega/2)(2Q - 1) - 2Y ] dt + 2 sqrt(gamma) Y (1 - 2Q) dW
//! ```
//!
//! where `omega = Omega / sqrt(gamma)`. On plateaus near `Q = 0` the coherence
//! relaxes to `Y = -omega/4`.

use super::QubitParams;
use crate::error::{invalid, Result};
use crate::path::ScalarPath;
use crate::sde::ClampStats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub q: f64,
    pub y: f64,
}

/// Euler-Maruyama step. No clamping.
#[inline]
pub fn reduced_step(s: ReducedState, dw: f64, gamma: f64, big_omega: f64, dt: f64) -> ReducedState {
    let sg = gamma.sqrt();
    let omega = big_omega / sg;
    let ReducedState { q, y } = s;
    ReducedState {
        q: q - omega * y * dt + 4.0 * sg * q * (1.0 - q) * dw,
        y: y + gamma * (0.5 * omega * (2.0 * q - 1.0) - 2.0 * y) * dt + 2.0 * sg * y * (1.0 - 2.0 * q) * dw,
    }
}

#[derive(Debug, Clone)]
pub struct ReducedRun {
    pub q: ScalarPath,
    pub y: ScalarPath,
    /// Clamping of `Q` into `[0, 1]`.
    pub clamp: ClampStats,
}

/// Integrates the reduced system on the increments `noise`; `Q` is clamped
/// into `[0, 1]` and `|Y|` into the Bloch disc after each step.
pub fn integrate_reduced(params: &QubitParams, noise: &[f64]) -> Result<ReducedRun> {
    params.validate()?;
    if !(params.gamma > 0.0) {
        return Err(invalid("the reduced system needs gamma > 0"));
    }
    if params.rho0.ci != 0.0 {
        return Err(invalid("the reduced system needs a real initial state"));
    }
    let grid = params.grid()?;
    if noise.len() != grid.n_steps() {
        return Err(invalid(format!("noise path has {} increments for {} steps", noise.len(), grid.n_steps())));
    }
    let (gamma, om, dt) = (params.gamma, params.big_omega(), params.dt);
    let sg = gamma.sqrt();
    let mut s = ReducedState { q: params.rho0.a, y: sg * params.rho0.cr };
    let mut clamp = ClampStats::default();
    let mut q = Vec::with_capacity(grid.len());
    let mut y = Vec::with_capacity(grid.len());
    q.push(s.q);
    y.push(s.y);
    for &dw in noise {
        s = reduced_step(s, dw, gamma, om, dt);
        s.q = clamp.clamp(s.q);
        let ymax = sg * (s.q * (1.0 - s.q)).sqrt();
        s.y = s.y.clamp(-ymax, ymax);
        q.push(s.q);
        y.push(s.y);
    }
    Ok(ReducedRun { q: ScalarPath::new(grid, q, "Q")?, y: ScalarPath::new(grid, y, "Y")?, clamp })
}
