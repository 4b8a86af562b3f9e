// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::state::DensityMatrix;
use super::{QubitParams, SmeScheme};
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::path::ScalarPath;
use crate::rng::RngStream;

const SME_NOISE_PURPOSE: u64 = 21;

#[derive(Debug, Clone, Copy)]
struct Coefficients {
    gamma: f64,
    sqrt_gamma: f64,
    big_omega: f64,
    dt: f64,
}

impl Coefficients {
    fn new(p: &QubitParams) -> Self {
        Self { gamma: p.gamma, sqrt_gamma: p.gamma.sqrt(), big_omega: p.big_omega(), dt: p.dt }
    }
}

/// Outcome of one step: new state, projection distance, and the factor by
/// which `det rho` was multiplied (Kraus scheme only).
#[derive(Debug, Clone, Copy)]
struct Step {
    rho: DensityMatrix,
    projection: f64,
    det_factor: Option<f64>,
}

#[inline]
fn euler_step(rho: &DensityMatrix, dw: f64, c: &Coefficients) -> Step {
    let DensityMatrix { a, d, cr, ci } = *rho;
    let (dt, sg, om, g) = (c.dt, c.sqrt_gamma, c.big_omega, c.gamma);
    let s = a - d;
    let noise = sg * dw;
    let mut next = DensityMatrix {
        a: a - om * cr * dt + noise * 2.0 * a * (1.0 - s),
        d: d + om * cr * dt - noise * 2.0 * d * (1.0 + s),
        cr: cr + (0.5 * om * s - 2.0 * g * cr) * dt - noise * 2.0 * s * cr,
        ci: ci - 2.0 * g * ci * dt - noise * 2.0 * s * ci,
    };
    next = next.scale(1.0 / next.trace());
    let projection = next.project_positive();
    Step { rho: next, projection, det_factor: None }
}

#[inline]
fn kraus_step(rho: &DensityMatrix, dw: f64, c: &Coefficients) -> Step {
    let DensityMatrix { a, d, cr, ci } = *rho;
    let (dt, sg, g) = (c.dt, c.sqrt_gamma, c.gamma);
    let dy = 2.0 * sg * (a - d) * dt + dw;
    let alpha = 1.0 - g * dt + 0.5 * g * dy * dy;
    let beta = sg * dy;
    let h = 0.5 * c.big_omega * dt;
    let (m11, m12, m21, m22) = (alpha + beta, -h, h, alpha - beta);
    let det_m = m11 * m22 - m12 * m21;
    let (r11, r12) = (m11 * a + m12 * cr, m11 * cr + m12 * d);
    let (r21, r22) = (m21 * a + m22 * cr, m21 * cr + m22 * d);
    let na = r11 * m11 + r12 * m12;
    let ncr = r11 * m21 + r12 * m22;
    let nd = r21 * m21 + r22 * m22;
    let tr = na + nd;
    let inv = 1.0 / tr;
    let next = DensityMatrix { a: na * inv, d: nd * inv, cr: ncr * inv, ci: det_m * ci * inv };
    Step { rho: next, projection: 0.0, det_factor: Some(det_m * det_m * inv * inv) }
}

#[inline]
fn step_with(rho: &DensityMatrix, dw: f64, c: &Coefficients, scheme: SmeScheme) -> Step {
    match scheme {
        SmeScheme::EulerMaruyama => euler_step(rho, dw, c),
        SmeScheme::Kraus => kraus_step(rho, dw, c),
    }
}

/// One step of the master equation with innovation increment `dw`.
///
/// Returns the new state and the Frobenius distance of any positivity projection.
pub fn sme_step(rho: &DensityMatrix, dw: f64, params: &QubitParams) -> (DensityMatrix, f64) {
    let s = step_with(rho, dw, &Coefficients::new(params), params.scheme);
    (s.rho, s.projection)
}

/// Streaming integrator. `det` is carried multiplicatively under the Kraus
/// scheme, which keeps its relative precision far below the rounding floor of
/// `a d - |c|^2`.
#[derive(Debug, Clone)]
pub struct SmeStepper {
    rho: DensityMatrix,
    det: f64,
    x: f64,
    k: usize,
    coeffs: Coefficients,
    scheme: SmeScheme,
    sqrt_dt: f64,
    noise: RngStream,
    real_state: bool,
    pub projection_total: f64,
    pub projection_count: u64,
}

impl SmeStepper {
    pub fn new(params: &QubitParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            rho: params.rho0,
            det: params.rho0.det().max(0.0),
            x: 0.0,
            k: 0,
            coeffs: Coefficients::new(params),
            scheme: params.scheme,
            sqrt_dt: params.dt.sqrt(),
            noise: params.seed.derive(SME_NOISE_PURPOSE).open(),
            real_state: params.rho0.ci == 0.0,
            projection_total: 0.0,
            projection_count: 0,
        })
    }

    #[inline]
    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.rho.a
    }

    /// `Y = sqrt(gamma) Re <+|rho|->`.
    #[inline]
    pub fn y(&self) -> f64 {
        self.coeffs.sqrt_gamma * self.rho.cr
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.det
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    /// Draws the next innovation increment and advances; returns it.
    #[inline]
    pub fn step(&mut self) -> f64 {
        let dw = self.sqrt_dt * self.noise.standard_normal();
        self.step_with_noise(dw);
        dw
    }

    #[inline]
    pub fn step_with_noise(&mut self, dw: f64) {
        let c = &self.coeffs;
        self.x += 2.0 * c.sqrt_gamma * self.rho.sz() * c.dt + dw;
        let s = step_with(&self.rho, dw, c, self.scheme);
        if s.projection > 0.0 {
            self.projection_total += s.projection;
            self.projection_count += 1;
        }
        self.rho = s.rho;
        self.det = match s.det_factor {
            Some(f) => self.det * f,
            None => self.rho.det(),
        };
        if self.real_state {
            assert!(self.rho.ci.abs() <= 1e-10, "imaginary coherence appeared: {}", self.rho.ci);
        }
        self.k += 1;
    }
}

/// Full trajectory of the monitored qubit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmeRun {
    pub grid: TimeGrid,
    pub rho: Vec<DensityMatrix>,
    pub q: ScalarPath,
    pub y: ScalarPath,
    /// `det rho_t`.
    pub purity: ScalarPath,
    pub x: ScalarPath,
    /// Innovation increments, one per step.
    pub noise: Vec<f64>,
    pub projection_total: f64,
}

impl SmeRun {
    /// Columns `time,Q,Y,purity,X`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        crate::path::write_columns_csv(
            out,
            &["Q", "Y", "purity", "X"],
            &self.grid,
            &[&self.q.values, &self.y.values, &self.purity.values, &self.x.values],
        )
    }
}

fn run(params: &QubitParams, noise: Option<&[f64]>) -> Result<SmeRun> {
    let grid = params.grid()?;
    if let Some(n) = noise {
        if n.len() != grid.n_steps() {
            return Err(invalid(format!("noise path has {} increments for {} steps", n.len(), grid.n_steps())));
        }
    }
    let mut st = SmeStepper::new(params)?;
    let len = grid.len();
    let mut rho = Vec::with_capacity(len);
    let (mut q, mut y, mut det, mut x) =
        (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    let mut used = Vec::with_capacity(grid.n_steps());
    let record =
        |st: &SmeStepper, rho: &mut Vec<_>, q: &mut Vec<_>, y: &mut Vec<_>, det: &mut Vec<_>, x: &mut Vec<_>| {
            rho.push(*st.rho());
            q.push(st.q());
            y.push(st.y());
            det.push(st.det());
            x.push(st.x());
        };
    record(&st, &mut rho, &mut q, &mut y, &mut det, &mut x);
    for k in 0..grid.n_steps() {
        match noise {
            Some(n) => {
                st.step_with_noise(n[k]);
                used.push(n[k]);
            }
            None => used.push(st.step()),
        }
        record(&st, &mut rho, &mut q, &mut y, &mut det, &mut x);
    }
    Ok(SmeRun {
        grid,
        rho,
        q: ScalarPath::new(grid, q, "Q")?,
        y: ScalarPath::new(grid, y, "Y")?,
        purity: ScalarPath::new(grid, det, "purity")?,
        x: ScalarPath::new(grid, x, "X")?,
        noise: used,
        projection_total: st.projection_total,
    })
}

pub fn integrate_sme(params: &QubitParams) -> Result<SmeRun> {
    run(params, None)
}

/// Same as [`integrate_sme`] but driven by a given innovation path.
pub fn integrate_sme_with_noise(params: &QubitParams, noise: &[f64]) -> Result<SmeRun> {
    run(params, Some(noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{BlochVector, OmegaMode};
    use crate::rng::StreamSpec;

    fn params(gamma: f64, omega: f64, dt: f64, horizon: f64, scheme: SmeScheme) -> QubitParams {
        QubitParams {
            gamma,
            omega,
            omega_mode: OmegaMode::Scaled,
            dt,
            horizon,
            rho0: DensityMatrix::PLUS_Z,
            seed: StreamSpec::new(17, 0),
            scheme,
        }
    }

    const SCHEMES: [SmeScheme; 2] = [SmeScheme::EulerMaruyama, SmeScheme::Kraus];

    #[test]
    fn pointer_state_is_fixed_without_drive() {
        for scheme in SCHEMES {
            let p = params(50.0, 0.0, 1e-3, 1.0, scheme);
            for dw in [-0.1, 0.0, 0.03, 0.2] {
                let (out, proj) = sme_step(&DensityMatrix::PLUS_Z, dw, &p);
                assert_eq!(out, DensityMatrix::PLUS_Z);
                assert_eq!(proj, 0.0);
            }
        }
    }

    #[test]
    fn trace_is_one_after_each_step() {
        let mut s = RngStream::new(5, 0);
        for scheme in SCHEMES {
            let p = params(30.0, 1.3, 1e-3, 1.0, scheme);
            for _ in 0..2000 {
                let v = loop {
                    let v = BlochVector::new(2.0 * s.uniform() - 1.0, 0.0, 2.0 * s.uniform() - 1.0);
                    if v.norm() <= 1.0 {
                        break v;
                    }
                };
                let rho = DensityMatrix::from_bloch(v).unwrap();
                let (out, _) = sme_step(&rho, s.gaussian_increment(1e-3), &p);
                assert!((out.trace() - 1.0).abs() < 1e-12);
                assert!(out.det() >= -1e-12);
            }
        }
    }

    #[test]
    fn unmeasured_rabi_half_period_flips_state() {
        for scheme in SCHEMES {
            let mut p = params(0.0, 0.0, 1e-4, 1.0, scheme);
            p.omega_mode = OmegaMode::Affine;
            let om = p.big_omega();
            p.horizon = std::f64::consts::PI / om;
            let run = integrate_sme(&p).unwrap();
            assert!(run.q.last().abs() < 10.0 * p.dt * om, "{:?} {}", scheme, run.q.last());
        }
    }

    #[test]
    fn signal_accumulates_increments() {
        let p = params(10.0, 1.0, 1e-3, 0.5, SmeScheme::Kraus);
        let run = integrate_sme(&p).unwrap();
        let mut x = 0.0;
        for k in 0..run.noise.len() {
            x += 2.0 * p.gamma.sqrt() * run.rho[k].sz() * p.dt + run.noise[k];
            assert!((run.x.values[k + 1] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn replaying_noise_reproduces_run() {
        let p = params(10.0, 1.0, 1e-3, 0.5, SmeScheme::Kraus);
        let a = integrate_sme(&p).unwrap();
        let b = integrate_sme_with_noise(&p, &a.noise).unwrap();
        assert_eq!(a.q.values, b.q.values);
        assert!(integrate_sme_with_noise(&p, &a.noise[1..]).is_err());
    }

    #[test]
    fn kraus_keeps_pure_states_pure() {
        let mut p = params(100.0, 1.0, 1e-4, 0.2, SmeScheme::Kraus);
        p.rho0 = DensityMatrix::from_bloch(BlochVector::new(0.6, 0.0, 0.8)).unwrap();
        let run = integrate_sme(&p).unwrap();
        assert!(run.purity.values.iter().all(|&d| d.abs() < 1e-15));
        assert!(run.rho.iter().all(|r| r.det().abs() < 1e-12));
    }
}
