// SPDX-License-Identifier: Apache-2.0

//! Continuum limit of the toy model.
//!
//! The estimate obeys `dQ = lt (1/2 - Q) dt + sqrt(g) Q (1 - Q) dW` where `lt` is
//! the filter's rate parameter and `g` the measurement rate. Two drives are
//! available: the innovation drive integrates that equation with a Wiener
//! process, the physical drive simulates the hidden telegraph `R`, generates the
//! signal `dX = (sqrt(g)/2)(2R - 1) dt + dB` and filters on `X` alone.
//!
//! Under the scaling `lambda = lt dt / 2` the hidden telegraph flips at rate `lt / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::path::{write_columns_csv, ScalarPath};
use crate::rng::{RngStream, StreamSpec};

const SIGNAL_PURPOSE: u64 = 11;
const TELEGRAPH_PURPOSE: u64 = 12;
const INNOVATION_PURPOSE: u64 = 13;

/// Largest per-step flip probability the telegraph generator accepts.
pub const MAX_FLIP_PROBABILITY: f64 = 0.1;
/// Largest `gamma * dt` at which excursions are considered resolved.
pub const SPIKE_RESOLUTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveMode {
    Innovation,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub lambda_tilde: f64,
    pub gamma: f64,
    pub dt: f64,
    pub horizon: f64,
    pub q0: f64,
    pub seed: StreamSpec,
    pub mode: DriveMode,
    /// Initial hidden state for the physical drive; uniform when absent.
    pub r0: Option<u8>,
}

impl SdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_tilde >= 0.0) || !self.lambda_tilde.is_finite() {
            return Err(invalid(format!("lambda_tilde must be >= 0, got {}", self.lambda_tilde)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.q0) {
            return Err(invalid(format!("Q0 must lie in [0, 1], got {}", self.q0)));
        }
        if matches!(self.r0, Some(r) if r > 1) {
            return Err(invalid("R0 must be 0 or 1"));
        }
        TimeGrid::covering(self.horizon, self.dt)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::covering(self.horizon, self.dt)
    }

    /// Flip rate of the hidden telegraph implied by the filter's model.
    pub fn flip_rate(&self) -> f64 {
        self.lambda_tilde / 2.0
    }

    /// Refuses grids too coarse to resolve excursions (`gamma * dt > 0.05`).
    pub fn require_spike_resolution(&self) -> Result<()> {
        if self.gamma * self.dt > SPIKE_RESOLUTION {
            return Err(invalid(format!(
                "gamma*dt = {} exceeds {SPIKE_RESOLUTION}; excursions are not resolved",
                self.gamma * self.dt
            )));
        }
        Ok(())
    }
}

/// Mass removed by clamping `Q` back into `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampStats {
    pub total: f64,
    pub max: f64,
    pub count: u64,
}

impl ClampStats {
    #[inline]
    pub(crate) fn clamp(&mut self, q: f64) -> f64 {
        let c = q.clamp(0.0, 1.0);
        let d = (q - c).abs();
        if d > 0.0 {
            self.total += d;
            self.count += 1;
            if d > self.max {
                self.max = d;
            }
        }
        c
    }

    pub fn merge(&mut self, other: &Self) {
        self.total += other.total;
        self.count += other.count;
        self.max = self.max.max(other.max);
    }
}

/// Jointly simulated telegraph, signal and filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrace {
    pub grid: TimeGrid,
    pub r: Vec<u8>,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub clamp: ClampStats,
}

impl CoupledTrace {
    pub fn q_path(&self) -> ScalarPath {
        ScalarPath { grid: self.grid, values: self.q.clone(), label: "Q".into() }
    }

    /// Columns `time,R,X,Q`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let r: Vec<f64> = self.r.iter().map(|&v| v as f64).collect();
        write_columns_csv(out, &["R", "X", "Q"], &self.grid, &[&r, &self.x, &self.q])
    }
}

/// Telegraph path with per-step flip probability `flip_rate * dt`.
pub fn simulate_telegraph(flip_rate: f64, grid: &TimeGrid, r0: u8, stream: &mut RngStream) -> Result<Vec<u8>> {
    let p = flip_rate * grid.dt();
    if !(flip_rate >= 0.0) {
        return Err(invalid(format!("flip rate must be >= 0, got {flip_rate}")));
    }
    if p > MAX_FLIP_PROBABILITY {
        return Err(invalid(format!("flip probability per step {p} exceeds {MAX_FLIP_PROBABILITY}; refine the grid")));
    }
    if r0 > 1 {
        return Err(invalid("R0 must be 0 or 1"));
    }
    let mut r = r0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(r);
    for _ in 0..grid.n_steps() {
        if stream.uniform() < p {
            r ^= 1;
        }
        out.push(r);
    }
    Ok(out)
}

/// Euler-Maruyama step of the filter given the innovation increment.
#[inline]
pub fn innovation_step(q: f64, dw: f64, lambda_tilde: f64, sqrt_gamma: f64, dt: f64) -> f64 {
    q + lambda_tilde * (0.5 - q) * dt + sqrt_gamma * q * (1.0 - q) * dw
}

/// Euler-Maruyama step of the filter given a signal increment `dx`.
#[inline]
pub fn signal_step(q: f64, dx: f64, lambda_tilde: f64, sqrt_gamma: f64, dt: f64) -> f64 {
    let innovation = dx - 0.5 * sqrt_gamma * (2.0 * q - 1.0) * dt;
    q + lambda_tilde * (0.5 - q) * dt + sqrt_gamma * q * (1.0 - q) * innovation
}

/// Streaming integrator for the innovation drive.
#[derive(Debug, Clone)]
pub struct InnovationStepper {
    q: f64,
    k: usize,
    lambda_tilde: f64,
    sqrt_gamma: f64,
    dt: f64,
    sqrt_dt: f64,
    noise: RngStream,
    pub clamp: ClampStats,
}

impl InnovationStepper {
    pub fn new(params: &SdeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            q: params.q0,
            k: 0,
            lambda_tilde: params.lambda_tilde,
            sqrt_gamma: params.gamma.sqrt(),
            dt: params.dt,
            sqrt_dt: params.dt.sqrt(),
            noise: params.seed.derive(INNOVATION_PURPOSE).open(),
            clamp: ClampStats::default(),
        })
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn step(&mut self) -> f64 {
        let dw = self.sqrt_dt * self.noise.standard_normal();
        let raw = innovation_step(self.q, dw, self.lambda_tilde, self.sqrt_gamma, self.dt);
        self.q = self.clamp.clamp(raw);
        self.k += 1;
        self.q
    }
}

pub struct InnovationRun {
    pub q: ScalarPath,
    pub clamp: ClampStats,
}

/// Innovation-drive path of `Q`, clamped to `[0, 1]` after each step.
pub fn integrate_innovation(params: &SdeParams) -> Result<InnovationRun> {
    let grid = params.grid()?;
    let mut st = InnovationStepper::new(params)?;
    let mut values = Vec::with_capacity(grid.len());
    values.push(st.q());
    for _ in 0..grid.n_steps() {
        values.push(st.step());
    }
    Ok(InnovationRun { q: ScalarPath::new(grid, values, "Q")?, clamp: st.clamp })
}

/// Hidden-state schedule for the physical drive.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Telegraph {
    Random {
        stream: RngStream,
        p_flip: f64,
    },
    /// Grid indices at which `R` flips, in increasing order.
    Scheduled {
        flips: Vec<usize>,
        next: usize,
    },
}

/// Streaming integrator for the physical drive. `Q` is computed from `X` only.
#[derive(Debug, Clone)]
pub struct JointStepper {
    k: usize,
    r: u8,
    x: f64,
    q: f64,
    lambda_tilde: f64,
    sqrt_gamma: f64,
    dt: f64,
    sqrt_dt: f64,
    signal_noise: RngStream,
    telegraph: Telegraph,
    pub clamp: ClampStats,
}

impl JointStepper {
    pub fn new(params: &SdeParams) -> Result<Self> {
        params.validate()?;
        let p_flip = params.flip_rate() * params.dt;
        if p_flip > MAX_FLIP_PROBABILITY {
            return Err(invalid(format!(
                "flip probability per step {p_flip} exceeds {MAX_FLIP_PROBABILITY}; refine the grid"
            )));
        }
        let mut stream = params.seed.derive(TELEGRAPH_PURPOSE).open();
        let r = params.r0.unwrap_or_else(|| (stream.uniform() < 0.5) as u8);
        Ok(Self::build(params, r, Telegraph::Random { stream, p_flip }))
    }

    /// Physical drive with `R` flipping exactly at the given times.
    pub fn scheduled(params: &SdeParams, flip_times: &[f64]) -> Result<Self> {
        params.validate()?;
        let grid = params.grid()?;
        if flip_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("flip times must be strictly increasing"));
        }
        if flip_times.iter().any(|&t| !(t >= grid.t0() && t <= grid.t_end())) {
            return Err(invalid(format!("flip times must lie within [0, {}]", grid.t_end())));
        }
        let flips = flip_times.iter().map(|&t| grid.index_at_or_after(t)).collect();
        let r = params.r0.unwrap_or(0);
        Ok(Self::build(params, r, Telegraph::Scheduled { flips, next: 0 }))
    }

    fn build(params: &SdeParams, r: u8, telegraph: Telegraph) -> Self {
        let mut st = Self {
            k: 0,
            r,
            x: 0.0,
            q: params.q0,
            lambda_tilde: params.lambda_tilde,
            sqrt_gamma: params.gamma.sqrt(),
            dt: params.dt,
            sqrt_dt: params.dt.sqrt(),
            signal_noise: params.seed.derive(SIGNAL_PURPOSE).open(),
            telegraph,
            clamp: ClampStats::default(),
        };
        st.apply_schedule();
        st
    }

    fn apply_schedule(&mut self) {
        if let Telegraph::Scheduled { flips, next } = &mut self.telegraph {
            while *next < flips.len() && flips[*next] <= self.k {
                self.r ^= 1;
                *next += 1;
            }
        }
    }

    #[inline]
    pub fn r(&self) -> u8 {
        self.r
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Advances one grid step; returns the signal increment used.
    #[inline]
    pub fn step(&mut self) -> f64 {
        let db = self.sqrt_dt * self.signal_noise.standard_normal();
        let dx = 0.5 * self.sqrt_gamma * (2.0 * self.r as f64 - 1.0) * self.dt + db;
        self.x += dx;
        let raw = signal_step(self.q, dx, self.lambda_tilde, self.sqrt_gamma, self.dt);
        self.q = self.clamp.clamp(raw);
        self.k += 1;
        match &mut self.telegraph {
            Telegraph::Random { stream, p_flip } => {
                if stream.uniform() < *p_flip {
                    self.r ^= 1;
                }
            }
            Telegraph::Scheduled { .. } => self.apply_schedule(),
        }
        dx
    }
}

fn collect_joint(mut st: JointStepper, grid: TimeGrid) -> CoupledTrace {
    let n = grid.len();
    let (mut r, mut x, mut q) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    r.push(st.r());
    x.push(st.x());
    q.push(st.q());
    for _ in 0..grid.n_steps() {
        st.step();
        r.push(st.r());
        x.push(st.x());
        q.push(st.q());
    }
    CoupledTrace { grid, r, x, q, clamp: st.clamp }
}

pub fn simulate_joint(params: &SdeParams) -> Result<CoupledTrace> {
    let grid = params.grid()?;
    Ok(collect_joint(JointStepper::new(params)?, grid))
}

pub fn simulate_joint_scheduled(params: &SdeParams, flip_times: &[f64]) -> Result<CoupledTrace> {
    let grid = params.grid()?;
    Ok(collect_joint(JointStepper::scheduled(params, flip_times)?, grid))
}

/// Filter driven by a cumulative signal path; reads nothing but `x`.
pub fn filter_on_signal(x: &[f64], params: &SdeParams) -> Result<(Vec<f64>, ClampStats)> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("signal path is empty".into()));
    }
    let sg = params.gamma.sqrt();
    let mut clamp = ClampStats::default();
    let mut q = params.q0;
    let mut out = Vec::with_capacity(x.len());
    out.push(q);
    for w in x.windows(2) {
        q = clamp.clamp(signal_step(q, w[1] - w[0], params.lambda_tilde, sg, params.dt));
        out.push(q);
    }
    Ok((out, clamp))
}

/// `E[Q_t] = 1/2 + (Q0 - 1/2) exp(-lt t)`, valid for both drives.
pub fn mean_law(q0: f64, lambda_tilde: f64, t: f64) -> f64 {
    0.5 + (q0 - 0.5) * (-lambda_tilde * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lt: f64, g: f64, dt: f64, horizon: f64, q0: f64) -> SdeParams {
        SdeParams {
            lambda_tilde: lt,
            gamma: g,
            dt,
            horizon,
            q0,
            seed: StreamSpec::new(2024, 0),
            mode: DriveMode::Physical,
            r0: Some(0),
        }
    }

    #[test]
    fn telegraph_without_flips_is_constant() {
        let g = TimeGrid::covering(10.0, 1e-3).unwrap();
        let r = simulate_telegraph(0.0, &g, 1, &mut RngStream::new(1, 0)).unwrap();
        assert!(r.iter().all(|&v| v == 1));
    }

    #[test]
    fn telegraph_flip_rate_and_occupation() {
        let g = TimeGrid::covering(1e4, 1e-3).unwrap();
        let r = simulate_telegraph(0.5, &g, 0, &mut RngStream::new(2, 0)).unwrap();
        let flips = r.windows(2).filter(|w| w[0] != w[1]).count() as f64 / 1e4;
        assert!((flips - 0.5).abs() < 3.0 * (0.5f64 / 1e4).sqrt(), "{flips}");
        let occ = r.iter().map(|&v| v as f64).sum::<f64>() / r.len() as f64;
        // correlation time 1/(2 rate) = 1: about 5e3 independent blocks
        assert!((occ - 0.5).abs() < 3.0 * 0.5 / (5e3f64).sqrt(), "{occ}");
    }

    #[test]
    fn telegraph_refuses_coarse_grid() {
        let g = TimeGrid::covering(1.0, 0.5).unwrap();
        assert!(simulate_telegraph(1.0, &g, 0, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn absorbing_zero() {
        let run = integrate_innovation(&params(0.0, 100.0, 1e-3, 1.0, 0.0)).unwrap();
        assert!(run.q.values.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn noiseless_relaxation() {
        let dt = 1e-3;
        let run = integrate_innovation(&params(1.0, 0.0, dt, 1.0, 1.0)).unwrap();
        let exact = 0.5 + (-1.0f64).exp() / 2.0;
        assert!((exact - 0.6839397).abs() < 1e-7);
        assert!((run.q.last() - exact).abs() < 10.0 * dt);
    }

    #[test]
    fn unsorted_schedule_rejected() {
        let p = params(1.0, 100.0, 1e-3, 2.0, 0.0);
        assert!(simulate_joint_scheduled(&p, &[1.0, 0.5]).is_err());
        assert!(simulate_joint_scheduled(&p, &[1.0, 1.0]).is_err());
        assert!(simulate_joint_scheduled(&p, &[3.0]).is_err());
    }

    #[test]
    fn schedule_sets_hidden_path() {
        let p = params(1.0, 100.0, 1e-3, 2.0, 0.0);
        let t = simulate_joint_scheduled(&p, &[0.5, 1.25]).unwrap();
        assert_eq!(t.r[499], 0);
        assert_eq!(t.r[500], 1);
        assert_eq!(t.r[1249], 1);
        assert_eq!(t.r[1250], 0);
        assert_eq!(*t.r.last().unwrap(), 0);
    }

    #[test]
    fn filter_reads_signal_only() {
        let p = params(1.0, 1e3, 1e-4, 2.0, 0.5);
        let t = simulate_joint(&p).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-8);
        let (q, _) = filter_on_signal(&t.x, &p).unwrap();
        assert!(close(&q, &t.q));
        let mut p2 = p;
        p2.r0 = Some(1);
        let t2 = simulate_joint(&p2).unwrap();
        assert_ne!(t2.r, t.r);
        assert!(close(&filter_on_signal(&t2.x, &p2).unwrap().0, &t2.q));
    }

    #[test]
    fn localizes_on_frozen_state() {
        let p = params(1e-4, 1e4, 1e-6, 1.0, 0.5);
        let t = simulate_joint_scheduled(&p, &[]).unwrap();
        let mean = t.q.iter().sum::<f64>() / t.q.len() as f64;
        assert!(mean < 0.05, "{mean}");
    }

    #[test]
    fn trace_csv_header() {
        let p = params(1.0, 10.0, 0.1, 0.3, 0.5);
        let t = simulate_joint(&p).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time,R,X,Q\n"));
    }
}
