// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance on trace and positivity checks.
pub const STATE_TOL: f64 = 1e-12;

/// 2x2 Hermitian matrix `[[a, c], [conj(c), d]]` with `c = cr + i ci`.
///
/// `a = <+z|rho|+z>` is the probability `Q` of finding the qubit in `|+z>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub a: f64,
    pub d: f64,
    pub cr: f64,
    pub ci: f64,
}

/// Bloch components, `rho = (I + x sx + y sy + z sz) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl DensityMatrix {
    pub const PLUS_Z: Self = Self { a: 1.0, d: 0.0, cr: 0.0, ci: 0.0 };
    pub const MINUS_Z: Self = Self { a: 0.0, d: 1.0, cr: 0.0, ci: 0.0 };
    pub const MIXED: Self = Self { a: 0.5, d: 0.5, cr: 0.0, ci: 0.0 };

    pub fn from_bloch(b: BlochVector) -> Result<Self> {
        if b.norm() > 1.0 + STATE_TOL {
            return Err(invalid(format!("Bloch vector of length {} is not a state", b.norm())));
        }
        Ok(Self::from_bloch_unchecked(b))
    }

    pub(crate) fn from_bloch_unchecked(b: BlochVector) -> Self {
        Self { a: 0.5 * (1.0 + b.z), d: 0.5 * (1.0 - b.z), cr: 0.5 * b.x, ci: -0.5 * b.y }
    }

    pub fn bloch(&self) -> BlochVector {
        BlochVector { x: 2.0 * self.cr, y: -2.0 * self.ci, z: self.a - self.d }
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.d - (self.cr * self.cr + self.ci * self.ci)
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.a * self.a + self.d * self.d + 2.0 * (self.cr * self.cr + self.ci * self.ci)
    }

    /// `tr(sz rho)`.
    #[inline]
    pub fn sz(&self) -> f64 {
        self.a - self.d
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.a
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.a, self.d, self.cr, self.ci].iter().all(|v| v.is_finite()) {
            return Err(invalid("density matrix has non-finite entries"));
        }
        if (self.trace() - 1.0).abs() > STATE_TOL {
            return Err(invalid(format!("trace {} is not 1", self.trace())));
        }
        if self.a < -STATE_TOL || self.d < -STATE_TOL || self.det() < -STATE_TOL {
            return Err(invalid("density matrix is not positive semidefinite"));
        }
        Ok(())
    }

    pub(crate) fn scale(&self, s: f64) -> Self {
        Self { a: self.a * s, d: self.d * s, cr: self.cr * s, ci: self.ci * s }
    }

    /// Nearest positive trace-one matrix when the Bloch vector has left the
    /// unit ball; returns the Frobenius distance moved.
    pub(crate) fn project_positive(&mut self) -> f64 {
        let b = self.bloch();
        let n = b.norm();
        if n <= 1.0 {
            return 0.0;
        }
        let old = *self;
        *self = Self::from_bloch_unchecked(BlochVector::new(b.x / n, b.y / n, b.z / n));
        let (da, dd, dr, di) = (self.a - old.a, self.d - old.d, self.cr - old.cr, self.ci - old.ci);
        (da * da + dd * dd + 2.0 * (dr * dr + di * di)).sqrt()
    }
}
