// SPDX-License-Identifier: Apache-2.0

//! Reproducible random streams.
//!
//! A stream is a ChaCha8 keystream keyed by the master seed and selected by the
//! 64-bit stream id. Its output is a pure function of `(master_seed, stream_id,
//! draw index)`, so ensembles give the same numbers whatever the worker count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Identifies a random stream: `(master_seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl StreamSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// Spec for a different purpose within the same trajectory (hidden chain vs
    /// measurement noise, say). The purpose is mixed into the key, not the stream
    /// id, so derived streams never collide with sibling trajectories.
    pub fn derive(&self, purpose: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(purpose.wrapping_add(0x5eed))),
            stream_id: self.stream_id,
        }
    }

    pub fn open(&self) -> RngStream {
        RngStream::new(self.master_seed, self.stream_id)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    spec: StreamSpec,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self { spec: StreamSpec::new(master_seed, stream_id), rng }
    }

    pub fn spec(&self) -> StreamSpec {
        self.spec
    }

    pub fn master_seed(&self) -> u64 {
        self.spec.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.spec.stream_id
    }

    /// Standard normal draw.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Wiener increment over `dt`: mean 0, variance `dt`.
    #[inline]
    pub fn gaussian_increment(&mut self, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        dt.sqrt() * self.standard_normal()
    }

    /// `+1` with probability `p_plus`, `-1` otherwise.
    pub fn bernoulli_pm1(&mut self, p_plus: f64) -> Result<i8> {
        if !(0.0..=1.0).contains(&p_plus) {
            return Err(invalid(format!("probability {p_plus} outside [0, 1]")));
        }
        Ok(self.bernoulli_pm1_unchecked(p_plus))
    }

    #[inline]
    pub(crate) fn bernoulli_pm1_unchecked(&mut self, p_plus: f64) -> i8 {
        if self.uniform() < p_plus {
            1
        } else {
            -1
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn gaussian_increment(stream: &mut RngStream, dt: f64) -> f64 {
    stream.gaussian_increment(dt)
}

pub fn bernoulli_pm1(stream: &mut RngStream, p_plus: f64) -> Result<i8> {
    stream.bernoulli_pm1(p_plus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn unit_increment_mean() {
        let mut s = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gaussian_increment(1.0)).collect();
        let (m, _) = mean_var(&xs);
        assert!(m.abs() < 0.004, "mean {m}");
    }

    #[test]
    fn increment_variance_matches_dt() {
        let dt = 0.01;
        let mut s = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gaussian_increment(dt)).collect();
        let (_, v) = mean_var(&xs);
        let tol = 3.0 * (2.0f64 / 1e6).sqrt() * dt;
        assert!((v - dt).abs() < tol, "var {v}");
    }

    #[test]
    fn sibling_streams_uncorrelated() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let rho = correlation(&xs, &ys);
        assert!(rho.abs() < 0.01, "rho {rho}");
        assert!(rho.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn derived_streams_uncorrelated() {
        let spec = StreamSpec::new(11, 3);
        let mut a = spec.open();
        let mut b = spec.derive(1).open();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        assert!(correlation(&xs, &ys).abs() < 4.0 / (n as f64).sqrt());
    }

    fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
        let (mx, vx) = mean_var(xs);
        let (my, vy) = mean_var(ys);
        let n = xs.len() as f64;
        let c = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0);
        c / (vx * vy).sqrt()
    }

    #[test]
    fn same_spec_same_sequence() {
        let mut a = RngStream::new(99, 5);
        let mut b = RngStream::new(99, 5);
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn bernoulli_extremes() {
        let mut s = RngStream::new(3, 0);
        assert!((0..10_000).all(|_| s.bernoulli_pm1(1.0).unwrap() == 1));
        assert!((0..10_000).all(|_| s.bernoulli_pm1(0.0).unwrap() == -1));
    }

    #[test]
    fn bernoulli_mean() {
        let mut s = RngStream::new(4, 0);
        let p = (1.0 + 0.3) / 2.0;
        let n = 1_000_000;
        let sum: i64 = (0..n).map(|_| s.bernoulli_pm1(p).unwrap() as i64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 0.3).abs() < 0.003, "mean {mean}");
    }

    #[test]
    fn bernoulli_rejects_bad_probability() {
        let mut s = RngStream::new(3, 0);
        assert!(s.bernoulli_pm1(1.5).is_err());
        assert!(s.bernoulli_pm1(-0.1).is_err());
        assert!(s.bernoulli_pm1(f64::NAN).is_err());
    }
}
