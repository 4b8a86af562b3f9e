// SPDX-License-Identifier: Apache-2.0

//! Continuously monitored qubit: measurement of `sz` at rate `gamma`, Rabi drive
//! `(Omega/2) sy`.
//!
//! The conditioned state obeys the stochastic master equation
//!
//! ```text
//! d rho = -i (Omega/2) [sy, rho] dt - (gamma/2) [sz, [sz, rho]] dt
//!         + sqrt(gamma) (sz rho + rho sz - 2 tr(sz rho) rho) dW
//! ```
//!
//! with signal `dX = 2 sqrt(gamma) tr(sz rho) dt + dW`.

mod jumps;
mod lindblad;
mod reduced;
mod sme;
mod state;

pub use jumps::{count_complete_jumps, JumpCount};
pub use lindblad::{bloch_generator, lindblad_mean};
pub use reduced::{integrate_reduced, reduced_step, ReducedRun, ReducedState};
pub use sme::{integrate_sme, integrate_sme_with_noise, sme_step, SmeRun, SmeStepper};
pub use state::{BlochVector, DensityMatrix, STATE_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::rng::StreamSpec;

/// How the Rabi frequency follows the measurement rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaMode {
    /// `Omega = sqrt(gamma) * omega`.
    Scaled,
    /// `Omega = 2 + sqrt(gamma) * omega`; keeps Rabi oscillations visible at small gamma.
    Affine,
}

/// Discretisation of the stochastic master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmeScheme {
    /// Euler-Maruyama on the matrix entries, then trace renormalisation and a
    /// projection back onto the positive cone when needed.
    EulerMaruyama,
    /// Measurement-operator map `rho -> M rho M^T / tr`, with
    /// `M = I - i H dt - (L^2/2) dt + L dY + (L^2/2)(dY^2 - dt)`, `L = sqrt(gamma) sz`.
    /// Positive and pure-state preserving by construction; first order in `dt`
    /// like Euler-Maruyama.
    #[default]
    Kraus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub gamma: f64,
    pub omega: f64,
    pub omega_mode: OmegaMode,
    pub dt: f64,
    pub horizon: f64,
    pub rho0: DensityMatrix,
    pub seed: StreamSpec,
    #[serde(default)]
    pub scheme: SmeScheme,
}

impl QubitParams {
    /// Rabi frequency `Omega`.
    pub fn big_omega(&self) -> f64 {
        match self.omega_mode {
            OmegaMode::Scaled => self.gamma.sqrt() * self.omega,
            OmegaMode::Affine => 2.0 + self.gamma.sqrt() * self.omega,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::covering(self.horizon, self.dt)
    }

    /// `gamma = 0` is accepted: it switches the measurement off.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !self.omega.is_finite() {
            return Err(invalid("omega must be finite"));
        }
        self.rho0.validate()?;
        self.grid()?;
        Ok(())
    }

    pub fn require_spike_resolution(&self) -> Result<()> {
        if self.gamma * self.dt > crate::sde::SPIKE_RESOLUTION {
            return Err(invalid(format!(
                "gamma*dt = {} exceeds {}; excursions are not resolved",
                self.gamma * self.dt,
                crate::sde::SPIKE_RESOLUTION
            )));
        }
        Ok(())
    }
}
