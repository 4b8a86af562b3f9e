// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::detect::SpikeEvent;
use crate::error::{invalid, Result};

/// `[t_lo, t_hi) x [q_lo, q_hi)` in (time, height); open at height 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectDomain {
    pub t_lo: f64,
    pub t_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl RectDomain {
    /// `t_lo = t_hi` is accepted and gives an empty domain.
    pub fn new(t_lo: f64, t_hi: f64, q_lo: f64, q_hi: f64) -> Result<Self> {
        let d = Self { t_lo, t_hi, q_lo, q_hi };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_lo <= self.t_hi) || !self.t_lo.is_finite() || !self.t_hi.is_finite() {
            return Err(invalid(format!("domain times need t_lo <= t_hi, got [{}, {})", self.t_lo, self.t_hi)));
        }
        if !(0.0 < self.q_lo && self.q_lo < self.q_hi && self.q_hi <= 1.0) {
            return Err(invalid(format!(
                "domain heights need 0 < Q_lo < Q_hi <= 1, got [{}, {})",
                self.q_lo, self.q_hi
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    #[inline]
    pub fn contains(&self, t: f64, height: f64) -> bool {
        t >= self.t_lo && t < self.t_hi && height >= self.q_lo && height < self.q_hi
    }

    /// Spikes (not complete events) with apex inside the domain.
    pub fn count(&self, events: &[SpikeEvent]) -> u64 {
        events.iter().filter(|e| !e.complete && self.contains(e.t_max, e.height)).count() as u64
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.t_lo < other.t_hi && other.t_lo < self.t_hi && self.q_lo < other.q_hi && other.q_lo < self.q_hi
    }

    /// Image under `(t, Q) -> (A t, A Q)`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid(format!("scale factor must be > 0, got {a}")));
        }
        Self::new(a * self.t_lo, a * self.t_hi, a * self.q_lo, a * self.q_hi)
    }
}

/// `mu = prefactor * (t_hi - t_lo) * (1/Q_lo - 1/Q_hi)`: the integral of the
/// intensity `prefactor / Q^2` over the domain.
pub fn expected_count(domain: &RectDomain, prefactor: f64) -> f64 {
    prefactor * domain.duration() * (1.0 / domain.q_lo - 1.0 / domain.q_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        assert_eq!(expected_count(&RectDomain::new(1.0, 1.0, 0.2, 0.5).unwrap(), 3.0), 0.0);
        let ln2 = std::f64::consts::LN_2;
        let mu = expected_count(&RectDomain::new(0.0, ln2, 0.5, 1.0).unwrap(), 1.0);
        assert!((mu - ln2).abs() < 1e-15);
        assert!((1.0 - (-mu).exp() - 0.5).abs() < 1e-15);
        let mu = expected_count(&RectDomain::new(0.0, 1.0, 0.2, 0.5).unwrap(), 1.0);
        assert!((mu - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(RectDomain::new(1.0, 0.0, 0.1, 0.2).is_err());
        assert!(RectDomain::new(0.0, 1.0, 0.0, 0.2).is_err());
        assert!(RectDomain::new(0.0, 1.0, 0.3, 0.2).is_err());
        assert!(RectDomain::new(0.0, 1.0, 0.3, 1.2).is_err());
    }

    proptest! {
        #[test]
        fn mean_is_scale_invariant(t0 in 0.0..10.0f64, dt in 0.01..10.0f64, q0 in 0.01..0.4f64, w in 0.01..0.5f64, a in 0.5..2.0f64, k in 0.1..5.0f64) {
            let q1 = (q0 + w).min(1.0);
            let d = RectDomain::new(t0, t0 + dt, q0, q1).unwrap();
            prop_assume!(a * q1 <= 1.0);
            let s = d.scaled(a).unwrap();
            let (m, ms) = (expected_count(&d, k), expected_count(&s, k));
            prop_assert!((m - ms).abs() <= 1e-10 * m.abs().max(1.0));
        }
    }
}
