// SPDX-License-Identifier: Apache-2.0

use nalgebra::{Matrix3, Vector3};

use super::state::{BlochVector, DensityMatrix};
use super::QubitParams;
use crate::error::{invalid, Result};

/// Generator of the unconditioned Bloch dynamics, `d(x, y, z)/dt = G (x, y, z)`.
pub fn bloch_generator(gamma: f64, big_omega: f64) -> Matrix3<f64> {
    Matrix3::new(-2.0 * gamma, 0.0, big_omega, 0.0, -2.0 * gamma, 0.0, -big_omega, 0.0, 0.0)
}

/// Ensemble mean `E[rho_t]`: the dephasing Lindblad solution, via a matrix exponential.
pub fn lindblad_mean(params: &QubitParams, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("t must be >= 0, got {t}")));
    }
    params.rho0.validate()?;
    let b0 = params.rho0.bloch();
    let g = bloch_generator(params.gamma, params.big_omega()) * t;
    let b = g.exp() * Vector3::new(b0.x, b0.y, b0.z);
    Ok(DensityMatrix::from_bloch_unchecked(BlochVector::new(b[0], b[1], b[2])))
}
