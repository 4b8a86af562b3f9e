// SPDX-License-Identifier: Apache-2.0

//! Discrete-time toy model: a particle hopping between two compartments,
//! photographed by a blurry camera.
//!
//! Timing convention: the photo `delta[n]` (for `n = 0..n_steps`) is taken after
//! hop `n + 1` and reflects `R[n + 1]`. The filter therefore propagates the prior
//! through one hop and then conditions on the photo.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{RngStream, StreamSpec};

const HIDDEN_PURPOSE: u64 = 1;
const CAMERA_PURPOSE: u64 = 2;

/// Largest chain length the path-enumeration oracle accepts.
pub const BRUTE_FORCE_MAX_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModelParams {
    /// Measurement precision, in `(0, 1)`.
    pub epsilon: f64,
    /// Per-step flip probability, in `[0, 1/2]`.
    pub lambda: f64,
    pub n_steps: usize,
    pub seed: StreamSpec,
    /// Initial hidden state; drawn uniformly when absent.
    pub r0: Option<u8>,
    /// Prior probability that the particle starts on the left.
    pub q0: f64,
}

impl DiscreteModelParams {
    pub fn new(epsilon: f64, lambda: f64, n_steps: usize, seed: StreamSpec) -> Self {
        Self { epsilon, lambda, n_steps, seed, r0: None, q0: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(0.0..=0.5).contains(&self.lambda) {
            return Err(invalid(format!("lambda must lie in [0, 1/2], got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.q0) {
            return Err(invalid(format!("Q0 must lie in [0, 1], got {}", self.q0)));
        }
        if let Some(r) = self.r0 {
            if r > 1 {
                return Err(invalid(format!("R0 must be 0 or 1, got {r}")));
            }
        }
        Ok(())
    }
}

/// Hidden chain, photos, filtered and (optionally) smoothed estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrace {
    /// Hidden position, 1 = left. Length `n_steps + 1`.
    pub r: Vec<u8>,
    /// Photo outcomes. Length `n_steps`.
    pub delta: Vec<i8>,
    /// Filtered estimate. Length `n_steps + 1`.
    pub q: Vec<f64>,
    /// Smoothed estimate, same length as `q`.
    pub qs: Option<Vec<f64>>,
}

impl DiscreteTrace {
    /// Columns `step,R,delta,Q,Qs`; the `delta` cell of step 0 and absent `Qs` cells are empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |source| Error::Io { path: "<csv stream>".into(), source };
        let mut buf = String::from("step,R,delta,Q,Qs\n");
        for n in 0..self.r.len() {
            let delta = if n == 0 { String::new() } else { self.delta[n - 1].to_string() };
            let qs = self.qs.as_ref().map(|s| s[n].to_string()).unwrap_or_default();
            buf.push_str(&format!("{n},{},{delta},{},{qs}\n", self.r[n], self.q[n]));
            if buf.len() > 1 << 16 {
                out.write_all(buf.as_bytes()).map_err(io)?;
                buf.clear();
            }
        }
        out.write_all(buf.as_bytes()).map_err(io)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn simulate_hidden_chain(params: &DiscreteModelParams) -> Result<Vec<u8>> {
    params.validate()?;
    let mut rng = params.seed.derive(HIDDEN_PURPOSE).open();
    let mut r = params.r0.unwrap_or_else(|| (rng.uniform() < 0.5) as u8);
    let mut out = Vec::with_capacity(params.n_steps + 1);
    out.push(r);
    for _ in 0..params.n_steps {
        if rng.uniform() < params.lambda {
            r ^= 1;
        }
        out.push(r);
    }
    Ok(out)
}

/// Draws one photo per hop: `P(delta = +1 | R = 1) = (1 + epsilon) / 2`,
/// `P(delta = +1 | R = 0) = (1 - epsilon) / 2`. Photo `n` looks at `r[n + 1]`.
///
/// `epsilon` may be anything in `[0, 1]` here.
pub fn sample_measurements(r: &[u8], epsilon: f64, stream: &mut RngStream) -> Result<Vec<i8>> {
    if r.is_empty() {
        return Err(invalid("hidden sequence is empty"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let p_left = (1.0 + epsilon) / 2.0;
    let p_right = (1.0 - epsilon) / 2.0;
    Ok(r[1..].iter().map(|&rn| stream.bernoulli_pm1_unchecked(if rn == 1 { p_left } else { p_right })).collect())
}

/// One Bayes update: propagate through a hop, then condition on `delta`.
#[inline]
pub fn filter_step(q: f64, delta: i8, epsilon: f64, lambda: f64) -> f64 {
    let m = (1.0 - lambda) * q + lambda * (1.0 - q);
    let ed = epsilon * delta as f64;
    let den = 1.0 + 2.0 * ed * (m - 0.5);
    assert!(den > 0.0, "filter denominator vanished (epsilon = {epsilon})");
    ((1.0 + ed) * m / den).clamp(0.0, 1.0)
}

/// Filtered estimates `Q_0 = q0, Q_{n+1} = filter_step(Q_n, delta_n)`.
pub fn run_filter_with(deltas: &[i8], epsilon: f64, lambda: f64, q0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(deltas.len() + 1);
    let mut q = q0;
    out.push(q);
    for &d in deltas {
        q = filter_step(q, d, epsilon, lambda);
        out.push(q);
    }
    out
}

pub fn run_filter(deltas: &[i8], params: &DiscreteModelParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(run_filter_with(deltas, params.epsilon, params.lambda, params.q0))
}

/// Smoothed marginals `P(R_n = 1 | all photos)` by forward-backward recursion.
///
/// Backward messages are renormalised at every step, so chains of any length
/// are safe from underflow.
pub fn smooth_with(deltas: &[i8], epsilon: f64, lambda: f64, q0: f64) -> Vec<f64> {
    let forward = run_filter_with(deltas, epsilon, lambda, q0);
    let n = deltas.len();
    let mut out = vec![0.0; n + 1];
    // (beta for R = 0, beta for R = 1), normalised to sum 1
    let (mut b0, mut b1) = (0.5, 0.5);
    for k in (0..=n).rev() {
        let f = forward[k];
        let num = f * b1;
        let den = num + (1.0 - f) * b0;
        out[k] = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { f };
        if k == 0 {
            break;
        }
        let ed = epsilon * deltas[k - 1] as f64;
        let e1 = (1.0 + ed) / 2.0 * b1;
        let e0 = (1.0 - ed) / 2.0 * b0;
        let nb1 = (1.0 - lambda) * e1 + lambda * e0;
        let nb0 = lambda * e1 + (1.0 - lambda) * e0;
        let s = nb0 + nb1;
        b0 = nb0 / s;
        b1 = nb1 / s;
    }
    out
}

pub fn smooth(deltas: &[i8], params: &DiscreteModelParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(smooth_with(deltas, params.epsilon, params.lambda, params.q0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosteriorMode {
    Filtered,
    Smoothed,
}

/// Exact posterior marginals by enumerating all `2^(n+1)` hidden paths.
pub fn brute_force_posterior(deltas: &[i8], params: &DiscreteModelParams, mode: PosteriorMode) -> Result<Vec<f64>> {
    let n = deltas.len();
    if n > BRUTE_FORCE_MAX_STEPS {
        return Err(Error::ResourceGuard(format!(
            "path enumeration over {n} steps needs 2^{} paths (limit {BRUTE_FORCE_MAX_STEPS} steps)",
            n + 1
        )));
    }
    let (eps, lam, q0) = (params.epsilon, params.lambda, params.q0);
    let emit = |d: i8, r: u32| {
        let e = eps * d as f64;
        if r == 1 {
            (1.0 + e) / 2.0
        } else {
            (1.0 - e) / 2.0
        }
    };
    // numerators P(R_k = 1, evidence) and denominators P(evidence), per k
    let mut num = vec![0.0; n + 1];
    let mut den = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << (n + 1)) {
        let bit = |k: usize| (mask >> k) & 1;
        let mut prior = if bit(0) == 1 { q0 } else { 1.0 - q0 };
        for k in 1..=n {
            prior *= if bit(k) == bit(k - 1) { 1.0 - lam } else { lam };
        }
        if prior == 0.0 {
            continue;
        }
        match mode {
            PosteriorMode::Filtered => {
                let mut w = prior;
                for k in 0..=n {
                    if k > 0 {
                        w *= emit(deltas[k - 1], bit(k));
                    }
                    den[k] += w;
                    if bit(k) == 1 {
                        num[k] += w;
                    }
                }
            }
            PosteriorMode::Smoothed => {
                let w = (1..=n).fold(prior, |w, k| w * emit(deltas[k - 1], bit(k)));
                for k in 0..=n {
                    den[k] += w;
                    if bit(k) == 1 {
                        num[k] += w;
                    }
                }
            }
        }
    }
    Ok(num.iter().zip(&den).map(|(a, b)| if *b > 0.0 { a / b } else { f64::NAN }).collect())
}

/// Simulates chain and photos, then filters (and smooths when asked).
pub fn simulate_trace(params: &DiscreteModelParams, with_smoother: bool) -> Result<DiscreteTrace> {
    let r = simulate_hidden_chain(params)?;
    let mut camera = params.seed.derive(CAMERA_PURPOSE).open();
    let delta = sample_measurements(&r, params.epsilon, &mut camera)?;
    let q = run_filter_with(&delta, params.epsilon, params.lambda, params.q0);
    let qs = with_smoother.then(|| smooth_with(&delta, params.epsilon, params.lambda, params.q0));
    Ok(DiscreteTrace { r, delta, q, qs })
}
