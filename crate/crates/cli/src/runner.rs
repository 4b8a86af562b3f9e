// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use spikes::discrete::{brute_force_posterior, run_filter_with, simulate_trace, smooth_with, PosteriorMode};
use spikes::qubit::{DensityMatrix, QubitParams, SmeStepper};
use spikes::sde::{mean_law, ClampStats, DriveMode, InnovationStepper, JointStepper};
use spikes::spikes::stats::mean_sd;
use spikes::spikes::{
    band_shape_test, fit_prefactor, max_law_test, poisson_test, scale_invariance_test, spikelessness_comparison,
    wrong_prediction_probability, Detection, EventPool, PlateauTracker, WrongPredictionMonitor,
};
use spikes::{run_ensemble, EnsembleSpec, RectDomain, SpikeEvent, StreamSpec, TimeGrid};

use crate::config::{ModelConfig, Scenario, TestKind};
use crate::criteria::*;

const ORACLE_PURPOSE: u64 = 31;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub seed: Option<u64>,
    /// Run the scenario's tests; otherwise only simulate.
    pub analyze: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, seed: None, analyze: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub test: TestKind,
    /// Absent for purely descriptive tests.
    pub pass: Option<bool>,
    pub summary: String,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub steps: u64,
    pub trajectories: u64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub software_version: &'static str,
    pub master_seed: u64,
    pub tests: Vec<TestResult>,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<ClampStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau_time: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jumps: Option<u64>,
}

impl RunReport {
    pub fn test(&self, t: TestKind) -> Option<&TestResult> {
        self.tests.iter().find(|r| r.test == t)
    }

    /// No test with a verdict failed.
    pub fn passed(&self) -> bool {
        self.tests.iter().all(|t| t.pass != Some(false))
    }
}

/// Sampled trajectory columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recorded {
    pub stream_id: u64,
    /// `(name, unit)` per column; the first column is the time axis.
    pub columns: Vec<(&'static str, &'static str)>,
    pub values: Vec<Vec<f64>>,
}

impl Recorded {
    fn new(stream_id: u64, columns: Vec<(&'static str, &'static str)>) -> Self {
        let values = vec![Vec::new(); columns.len()];
        Self { stream_id, columns, values }
    }

    fn push(&mut self, row: &[f64]) {
        for (c, v) in self.values.iter_mut().zip(row) {
            c.push(*v);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub records: Vec<Recorded>,
    /// `(stream_id, event)`, plateau clocks pooled in stream order.
    pub events: Vec<(u64, SpikeEvent)>,
}

/// Integration steps a scenario will take, computed before any allocation.
pub fn projected_steps(sc: &Scenario) -> Result<u64> {
    let n = sc.ensemble.n_trajectories;
    let per = match &sc.model {
        ModelConfig::DiscreteToy(c) => {
            let passes = if sc.has(TestKind::Spikeless) { 2 } else { 1 };
            c.n_steps as u64 * passes
        }
        _ => sc.time_grid()?.map(|g| g.n_steps() as u64).unwrap_or(0),
    };
    let mut steps = n.saturating_mul(per);
    if let (Some(s), true) = (&sc.analysis.scaling, sc.has(TestKind::JumpRate)) {
        steps = steps.saturating_add((s.reference_trajectories + s.scaled_trajectories).saturating_mul(per));
    }
    if sc.has(TestKind::FilterOracle) || sc.has(TestKind::SmootherOracle) {
        let paths = 1u64 << (sc.analysis.instance_steps.min(40) + 1);
        steps = steps.saturating_add(sc.analysis.instances as u64 * paths * sc.analysis.instance_steps as u64);
    }
    Ok(steps)
}

pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let mut sc = scenario.clone();
    if let Some(seed) = opts.seed {
        sc.ensemble.master_seed = seed;
    }
    sc.validate()?;
    let steps = projected_steps(&sc)?;
    if steps > sc.output.budget {
        return Err(spikes::Error::ResourceGuard(format!(
            "scenario needs about {steps} integration steps, budget is {}",
            sc.output.budget
        ))
        .into());
    }
    let start = Instant::now();
    let mut out = match &sc.model {
        ModelConfig::DiscreteToy(_) => run_discrete(&sc, opts)?,
        ModelConfig::ClassicalSde(_) => run_classical(&sc, opts)?,
        ModelConfig::Qubit(_) => run_qubit(&sc, opts)?,
    };
    out.report.metrics =
        Metrics { steps, trajectories: sc.ensemble.n_trajectories, wall_clock_s: start.elapsed().as_secs_f64() };
    Ok(out)
}

fn empty_report(sc: &Scenario) -> RunReport {
    RunReport {
        scenario: sc.clone(),
        software_version: env!("CARGO_PKG_VERSION"),
        master_seed: sc.ensemble.master_seed,
        tests: Vec::new(),
        metrics: Metrics { steps: 0, trajectories: 0, wall_clock_s: 0.0 },
        clamp: None,
        projection_total: None,
        plateau_time: None,
        jumps: None,
    }
}

fn result(test: TestKind, pass: Option<bool>, summary: String, details: Value) -> TestResult {
    TestResult { test, pass, summary, details }
}

fn sampled(k: usize, n: usize, stride: usize) -> bool {
    k.is_multiple_of(stride) || k == n
}

// ---------------------------------------------------------------- discrete

fn run_discrete(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let a = &sc.analysis;
    let spikeless = sc.has(TestKind::Spikeless) && opts.analyze;
    let level = a.level;
    let (files, stride) = (sc.output.trajectory_files, sc.output.stride);
    let per = run_ensemble(&sc.ensemble_spec(), opts.workers, |spec| {
        let p = sc.discrete_params(spec).map_err(|e| spikes::Error::InvalidArgument(e.0))?;
        let want_record = spec.stream_id - sc.ensemble.base_stream_id < files;
        let trace = simulate_trace(&p, spikeless || want_record)?;
        let report = match (&trace.qs, spikeless) {
            (Some(qs), true) => Some(spikelessness_comparison(&trace.q, qs, &trace.r, level)?),
            _ => None,
        };
        let record = want_record.then(|| {
            let mut rec = Recorded::new(
                spec.stream_id,
                vec![("step", "photos"), ("R", "hidden state"), ("Q", "probability"), ("Qs", "probability")],
            );
            let qs = trace.qs.as_ref().expect("smoothed when recorded");
            let n = trace.q.len() - 1;
            for k in (0..=n).filter(|&k| sampled(k, n, stride)) {
                rec.push(&[k as f64, trace.r[k] as f64, trace.q[k], qs[k]]);
            }
            rec
        });
        Ok((report, record))
    })?;
    let mut report = empty_report(sc);
    let records = per.iter().filter_map(|(_, r)| r.clone()).collect();
    if opts.analyze {
        for t in &a.tests {
            report.tests.push(match t {
                TestKind::FilterOracle => oracle_test(sc, PosteriorMode::Filtered)?,
                TestKind::SmootherOracle => oracle_test(sc, PosteriorMode::Smoothed)?,
                TestKind::Spikeless => {
                    let filtered: u64 = per.iter().filter_map(|(r, _)| r.map(|r| r.filtered_count)).sum();
                    let smoothed: u64 = per.iter().filter_map(|(r, _)| r.map(|r| r.smoothed_count)).sum();
                    let ratio = (filtered > 0).then(|| smoothed as f64 / filtered as f64);
                    let pass = ratio.map(|r| r < SPIKELESS_RATIO).unwrap_or(false);
                    result(
                        *t,
                        Some(pass),
                        format!("smoothed/filtered excursions above {level}: {smoothed}/{filtered}"),
                        json!({ "level": level, "filtered_count": filtered, "smoothed_count": smoothed, "ratio": ratio }),
                    )
                }
                _ => unreachable!("validated"),
            });
        }
    }
    Ok(RunOutput { report, records, events: Vec::new() })
}

fn oracle_test(sc: &Scenario, mode: PosteriorMode) -> Result<TestResult> {
    let a = &sc.analysis;
    let mut rng = StreamSpec::new(sc.ensemble.master_seed, sc.ensemble.base_stream_id).derive(ORACLE_PURPOSE).open();
    let start = Instant::now();
    let mut max_diff = 0.0f64;
    for _ in 0..a.instances {
        let eps = 0.02 + 0.96 * rng.uniform();
        let lambda = 0.5 * rng.uniform();
        let q0 = rng.uniform();
        let deltas: Vec<i8> = (0..a.instance_steps).map(|_| if rng.uniform() < 0.5 { 1 } else { -1 }).collect();
        let mut p = spikes::discrete::DiscreteModelParams::new(eps, lambda, a.instance_steps, StreamSpec::new(0, 0));
        p.q0 = q0;
        let fast = match mode {
            PosteriorMode::Filtered => run_filter_with(&deltas, eps, lambda, q0),
            PosteriorMode::Smoothed => smooth_with(&deltas, eps, lambda, q0),
        };
        let exact = brute_force_posterior(&deltas, &p, mode)?;
        for (x, y) in fast.iter().zip(&exact) {
            max_diff = max_diff.max((x - y).abs());
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let test = match mode {
        PosteriorMode::Filtered => TestKind::FilterOracle,
        PosteriorMode::Smoothed => TestKind::SmootherOracle,
    };
    Ok(result(
        test,
        Some(max_diff <= ORACLE_TOL),
        format!("{} instances of {} steps: max |diff| = {max_diff:e} in {seconds:.3} s", a.instances, a.instance_steps),
        json!({ "instances": a.instances, "steps": a.instance_steps, "max_abs_diff": max_diff, "seconds": seconds }),
    ))
}

// --------------------------------------------------------------- classical

#[allow(clippy::large_enum_variant)]
enum Drive {
    Innovation(InnovationStepper),
    Physical(JointStepper),
}

struct ClassicalTraj {
    stream_id: u64,
    det: Detection,
    clamp: ClampStats,
    q_check: Option<f64>,
    monitor: Option<WrongPredictionMonitor>,
    record: Option<Recorded>,
}

fn classical_traj(sc: &Scenario, spec: StreamSpec, grid: &TimeGrid, analyze: bool) -> spikes::Result<ClassicalTraj> {
    let ModelConfig::ClassicalSde(c) = &sc.model else { unreachable!() };
    let p = sc.sde_params(spec).map_err(|e| spikes::Error::InvalidArgument(e.0))?;
    let a = &sc.analysis;
    let mut drive = match (p.mode, &c.flips) {
        (DriveMode::Innovation, _) => Drive::Innovation(InnovationStepper::new(&p)?),
        (DriveMode::Physical, Some(f)) => Drive::Physical(JointStepper::scheduled(&p, f)?),
        (DriveMode::Physical, None) => Drive::Physical(JointStepper::new(&p)?),
    };
    let mut tracker = PlateauTracker::new(a.thresholds)?;
    let check_idx =
        (analyze && sc.has(TestKind::MeanLaw)).then(|| grid.index_at_or_after(a.t_check.unwrap_or(grid.t_end())));
    let mut monitor = match (&c.flips, analyze && sc.has(TestKind::WrongPrediction)) {
        (Some(f), true) => Some(WrongPredictionMonitor::new(f[0], f[1], a.settle_tol)?),
        _ => None,
    };
    let n = grid.n_steps();
    let stride = sc.output.stride;
    let mut record = (spec.stream_id - sc.ensemble.base_stream_id < sc.output.trajectory_files).then(|| match drive {
        Drive::Innovation(_) => Recorded::new(spec.stream_id, vec![("time", "model time"), ("Q", "probability")]),
        Drive::Physical(_) => Recorded::new(
            spec.stream_id,
            vec![("time", "model time"), ("R", "hidden state"), ("X", "signal"), ("Q", "probability")],
        ),
    });
    let mut q_check = None;
    for k in 0..=n {
        if k > 0 {
            match &mut drive {
                Drive::Innovation(s) => {
                    s.step();
                }
                Drive::Physical(s) => {
                    s.step();
                }
            }
        }
        let t = grid.time(k);
        let (q, r, x) = match &drive {
            Drive::Innovation(s) => (s.q(), None, None),
            Drive::Physical(s) => (s.q(), Some(s.r()), Some(s.x())),
        };
        tracker.push(t, q);
        if check_idx == Some(k) {
            q_check = Some(q);
        }
        if let (Some(m), Some(r)) = (&mut monitor, r) {
            m.push(t, q, r);
        }
        if let Some(rec) = &mut record {
            if sampled(k, n, stride) {
                match (r, x) {
                    (Some(r), Some(x)) => rec.push(&[t, r as f64, x, q]),
                    _ => rec.push(&[t, q]),
                }
            }
        }
    }
    let clamp = match &drive {
        Drive::Innovation(s) => s.clamp,
        Drive::Physical(s) => s.clamp,
    };
    Ok(ClassicalTraj { stream_id: spec.stream_id, det: tracker.finish(grid.t_end()), clamp, q_check, monitor, record })
}

fn pool_detections<'a>(
    dets: impl Iterator<Item = (u64, &'a Detection)>,
    duration: f64,
) -> (EventPool, Vec<(u64, SpikeEvent)>) {
    let mut pool = EventPool::default();
    let mut tagged = Vec::new();
    for (id, d) in dets {
        let before = pool.events.len();
        pool.absorb(d, duration);
        tagged.extend(pool.events[before..].iter().map(|e| (id, *e)));
    }
    (pool, tagged)
}

fn run_classical(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let grid = sc.time_grid()?.expect("continuous model");
    let trajs = run_ensemble(&sc.ensemble_spec(), opts.workers, |spec| classical_traj(sc, spec, &grid, opts.analyze))?;
    let duration = grid.t_end() - grid.t0();
    let (pool, events) = pool_detections(trajs.iter().map(|t| (t.stream_id, &t.det)), duration);
    let mut clamp = ClampStats::default();
    for t in &trajs {
        clamp.merge(&t.clamp);
    }
    let mut report = empty_report(sc);
    report.clamp = Some(clamp);
    report.plateau_time = Some(pool.plateau_time);
    report.jumps = Some(pool.jumps());
    if opts.analyze {
        let ModelConfig::ClassicalSde(c) = &sc.model else { unreachable!() };
        for t in &sc.analysis.tests {
            let r = match t {
                TestKind::MeanLaw => {
                    let qs: Vec<f64> = trajs.iter().filter_map(|t| t.q_check).collect();
                    let t_check = sc.analysis.t_check.unwrap_or(grid.t_end());
                    let want = mean_law(c.q0, c.lambda_tilde, t_check);
                    let (m, sd) = mean_sd(&qs);
                    let se = sd / (qs.len() as f64).sqrt();
                    result(
                        *t,
                        Some((m - want).abs() <= SIGMAS * se),
                        format!("E[Q({t_check})] = {m:.5} +- {se:.5}, law {want:.5}"),
                        json!({ "t": t_check, "paths": qs.len(), "mean": m, "sd": sd, "std_error": se, "law": want }),
                    )
                }
                TestKind::WrongPrediction => {
                    let mons: Vec<_> = trajs.iter().filter_map(|t| t.monitor).collect();
                    let r = wrong_prediction_probability(&mons)?;
                    let f = c.flips.as_ref().expect("validated");
                    let gap = f[1] - f[0];
                    let pr = r.proportion;
                    result(
                        *t,
                        Some(within(pr.estimate, WRONG_PREDICTION_BAND)),
                        format!(
                            "P(wrong on gap {gap:.4}) = {:.4} [{:.4}, {:.4}] over {} intervals",
                            pr.estimate, pr.ci_low, pr.ci_high, pr.trials
                        ),
                        json!({
                            "gap": gap,
                            "report": r,
                            "poisson_prediction_nominal": spikes::spikes::predicted_wrong_probability(c.lambda_tilde, gap),
                            "poisson_prediction_half": spikes::spikes::predicted_wrong_probability(c.lambda_tilde / 2.0, gap),
                        }),
                    )
                }
                other => spike_test(sc, *other, &pool)?,
            };
            report.tests.push(r);
        }
    }
    let records = trajs.into_iter().filter_map(|t| t.record).collect();
    Ok(RunOutput { report, records, events })
}

/// Tests on pooled spike events, shared by the classical and qubit models.
/// A spike test on too few events fails instead of aborting the run.
fn spike_test(sc: &Scenario, t: TestKind, pool: &EventPool) -> Result<TestResult> {
    match spike_test_inner(sc, t, pool) {
        Err(e) => match e.downcast_ref::<spikes::Error>() {
            Some(spikes::Error::InsufficientData(msg)) => {
                Ok(result(t, Some(false), format!("insufficient data: {msg}"), json!({ "insufficient_data": msg })))
            }
            _ => Err(e),
        },
        ok => ok,
    }
}

fn spike_test_inner(sc: &Scenario, t: TestKind, pool: &EventPool) -> Result<TestResult> {
    let a = &sc.analysis;
    let label = a.plateau;
    let events = pool.clocked(label);
    let plateau_time = pool.plateau_time[label as usize];
    let nominal = sc.nominal_rate();
    Ok(match t {
        TestKind::Shape => {
            let bands: Vec<(f64, f64)> = a.bands.iter().map(|b| (b[0], b[1])).collect();
            let r = band_shape_test(&events, &bands)?;
            let counts: Vec<String> = r.bands.iter().map(|b| format!("{}/{:.1}", b.observed, b.expected)).collect();
            result(
                t,
                Some(r.pass),
                format!("plateau {label} time {plateau_time:.2}: band counts observed/expected {}", counts.join(", ")),
                json!({ "plateau": label, "plateau_time": plateau_time, "report": r }),
            )
        }
        TestKind::Prefactor => {
            let f = fit_prefactor(&events, plateau_time, a.q0)?;
            let ratio = f.prefactor / nominal;
            let jump_rate = pool.jumps() as f64 / pool.duration;
            result(
                t,
                Some(within(ratio, PREFACTOR_BAND)),
                format!(
                    "fitted prefactor {:.4} +- {:.4} = {ratio:.3} x nominal {nominal}; complete-jump rate {jump_rate:.4}",
                    f.prefactor, f.std_error
                ),
                json!({ "fit": f, "nominal": nominal, "ratio": ratio, "complete_jump_rate": jump_rate }),
            )
        }
        TestKind::MaxLaw => {
            let r = max_law_test(&events, a.q0)?;
            result(
                t,
                Some(r.n >= MIN_MAX_LAW_EVENTS && r.p_value > MAX_LAW_P),
                format!(
                    "{} events ({} complete), KS D = {:.4}, p = {:.4}",
                    r.n, r.n_complete, r.ks_statistic, r.p_value
                ),
                json!(r),
            )
        }
        TestKind::Poisson => {
            let domains = sc.domains()?;
            let prefactor = a.prefactor.unwrap_or(nominal);
            let r = poisson_test(&events, &domains, prefactor)?;
            let min_p = r.min_p_value();
            result(
                t,
                Some(min_p > MAX_LAW_P),
                format!("{} domains at prefactor {prefactor}: min p = {min_p:.4}", r.records.len()),
                json!(r),
            )
        }
        TestKind::ScaleInvariance => {
            let [t0, t1, q0, q1] = a.scale_domain.expect("validated");
            let d = RectDomain::new(t0, t1, q0, q1)?;
            let r = scale_invariance_test(&events, &d, a.scale_factor, plateau_time)?;
            result(
                t,
                Some(r.pass),
                format!("counts {} vs {} (tolerance {:.2})", r.count, r.scaled_count, r.tolerance),
                json!(r),
            )
        }
        _ => unreachable!("not a spike test"),
    })
}

// ------------------------------------------------------------------ qubit

struct QubitTraj {
    stream_id: u64,
    det: Detection,
    projection: f64,
    state_at_check: Option<DensityMatrix>,
    dets: Vec<f64>,
    record: Option<Recorded>,
}

fn qubit_traj(
    sc: &Scenario,
    p: &QubitParams,
    grid: &TimeGrid,
    analyze: bool,
    record: bool,
) -> spikes::Result<QubitTraj> {
    let a = &sc.analysis;
    let mut st = SmeStepper::new(p)?;
    let mut tracker = PlateauTracker::new(a.thresholds)?;
    let n = grid.n_steps();
    let check_idx =
        (analyze && sc.has(TestKind::LindbladMean)).then(|| grid.index_at_or_after(a.t_check.unwrap_or(grid.t_end())));
    let checkpoints: Vec<usize> = if analyze && sc.has(TestKind::Purity) {
        (1..=a.checkpoints).map(|j| (j * n + a.checkpoints / 2) / a.checkpoints).collect()
    } else {
        Vec::new()
    };
    let mut rec = record.then(|| {
        Recorded::new(
            p.seed.stream_id,
            vec![
                ("time", "model time"),
                ("Q", "probability"),
                ("Y", "scaled coherence"),
                ("det", "det rho"),
                ("X", "signal"),
            ],
        )
    });
    let mut state_at_check = None;
    let mut dets = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    for k in 0..=n {
        if k > 0 {
            st.step();
        }
        let t = grid.time(k);
        tracker.push(t, st.q());
        if check_idx == Some(k) {
            state_at_check = Some(*st.rho());
        }
        if next_cp < checkpoints.len() && checkpoints[next_cp] == k {
            dets.push(st.det());
            next_cp += 1;
        }
        if let Some(r) = &mut rec {
            if sampled(k, n, sc.output.stride) {
                r.push(&[t, st.q(), st.y(), st.det(), st.x()]);
            }
        }
    }
    Ok(QubitTraj {
        stream_id: p.seed.stream_id,
        det: tracker.finish(grid.t_end()),
        projection: st.projection_total,
        state_at_check,
        dets,
        record: rec,
    })
}

fn run_qubit(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let grid = sc.time_grid()?.expect("continuous model");
    let files = sc.output.trajectory_files;
    let trajs = run_ensemble(&sc.ensemble_spec(), opts.workers, |spec| {
        let p = sc.qubit_params(spec).map_err(|e| spikes::Error::InvalidArgument(e.0))?;
        qubit_traj(sc, &p, &grid, opts.analyze, spec.stream_id - sc.ensemble.base_stream_id < files)
    })?;
    let duration = grid.t_end() - grid.t0();
    let (pool, events) = pool_detections(trajs.iter().map(|t| (t.stream_id, &t.det)), duration);
    let mut report = empty_report(sc);
    report.projection_total = Some(trajs.iter().map(|t| t.projection).sum());
    report.plateau_time = Some(pool.plateau_time);
    report.jumps = Some(pool.jumps());
    if opts.analyze {
        for t in &sc.analysis.tests {
            let r = match t {
                TestKind::JumpRate => jump_rate_test(sc, &pool, &grid, opts)?,
                TestKind::LindbladMean => lindblad_test(sc, &trajs, &grid)?,
                TestKind::Purity => purity_test(sc, &trajs, &grid)?,
                other => spike_test(sc, *other, &pool)?,
            };
            report.tests.push(r);
        }
    }
    let records = trajs.into_iter().filter_map(|t| t.record).collect();
    Ok(RunOutput { report, records, events })
}

fn jump_pool(
    sc: &Scenario,
    omega: f64,
    first_stream: u64,
    n: u64,
    grid: &TimeGrid,
    workers: usize,
) -> Result<EventPool> {
    let spec = EnsembleSpec { master_seed: sc.ensemble.master_seed, base_stream_id: first_stream, n_trajectories: n };
    let mut bare = sc.clone();
    bare.analysis.tests.clear();
    let dets = run_ensemble(&spec, workers, |s| {
        let mut p = sc.qubit_params(s).map_err(|e| spikes::Error::InvalidArgument(e.0))?;
        p.omega = omega;
        qubit_traj(&bare, &p, grid, false, false).map(|t| (t.stream_id, t.det))
    })?;
    Ok(pool_detections(dets.iter().map(|(id, d)| (*id, d)), grid.t_end() - grid.t0()).0)
}

fn jump_rate_test(sc: &Scenario, pool: &EventPool, grid: &TimeGrid, opts: &RunOptions) -> Result<TestResult> {
    let ModelConfig::Qubit(c) = &sc.model else { unreachable!() };
    let w2 = c.omega * c.omega;
    let total = pool.jumps() as f64 / pool.duration;
    let per_direction = total / 2.0;
    let (rt, rp) = (total / w2, per_direction / w2);
    let absolute = within(rt, JUMP_RATE_BAND) || within(rp, JUMP_RATE_BAND);
    let mut summary = format!(
        "{} jumps over {:.1}: total rate {total:.4} ({rt:.3} omega^2), per direction {per_direction:.4} ({rp:.3} omega^2)",
        pool.jumps(),
        pool.duration
    );
    let mut details = json!({
        "jumps": pool.jumps(),
        "jumps_up": pool.jumps_up,
        "jumps_down": pool.jumps_down,
        "duration": pool.duration,
        "omega_squared": w2,
        "total_rate": total,
        "per_direction_rate": per_direction,
        "absolute_pass": absolute,
    });
    let mut pass = absolute;
    if let Some(s) = &sc.analysis.scaling {
        let first = sc.ensemble.base_stream_id + sc.ensemble.n_trajectories;
        let reference = jump_pool(sc, c.omega, first, s.reference_trajectories, grid, opts.workers)?;
        let scaled =
            jump_pool(sc, s.omega, first + s.reference_trajectories, s.scaled_trajectories, grid, opts.workers)?;
        let r_ref = reference.jumps() as f64 / reference.duration;
        let r_s = scaled.jumps() as f64 / scaled.duration;
        let ratio = r_s / r_ref;
        let expected = (s.omega / c.omega).powi(2);
        let scaling_pass = (ratio / expected - 1.0).abs() <= JUMP_SCALING_TOL;
        pass &= scaling_pass;
        summary.push_str(&format!(
            "; scaling omega {} -> {}: {} vs {} jumps, ratio {ratio:.3} (expected {expected:.3})",
            c.omega,
            s.omega,
            reference.jumps(),
            scaled.jumps()
        ));
        details["scaling"] = json!({
            "omega": s.omega,
            "reference_jumps": reference.jumps(),
            "reference_duration": reference.duration,
            "scaled_jumps": scaled.jumps(),
            "scaled_duration": scaled.duration,
            "ratio": ratio,
            "expected": expected,
            "pass": scaling_pass,
        });
    }
    Ok(result(TestKind::JumpRate, Some(pass), summary, details))
}

fn lindblad_test(sc: &Scenario, trajs: &[QubitTraj], grid: &TimeGrid) -> Result<TestResult> {
    let t_check = grid.time(grid.index_at_or_after(sc.analysis.t_check.unwrap_or(grid.t_end())));
    let p = sc.qubit_params(StreamSpec::new(0, 0))?;
    let want = spikes::qubit::lindblad_mean(&p, t_check)?;
    let states: Vec<DensityMatrix> = trajs.iter().filter_map(|t| t.state_at_check).collect();
    let mut comps = Vec::new();
    let mut pass = true;
    for (name, get, target) in [
        ("a", (|r: &DensityMatrix| r.a) as fn(&DensityMatrix) -> f64, want.a),
        ("cr", |r: &DensityMatrix| r.cr, want.cr),
        ("ci", |r: &DensityMatrix| r.ci, want.ci),
    ] {
        let xs: Vec<f64> = states.iter().map(get).collect();
        let (m, sd) = mean_sd(&xs);
        let se = sd / (xs.len() as f64).sqrt();
        let ok = if se > 0.0 { (m - target).abs() <= SIGMAS * se } else { (m - target).abs() <= ORACLE_TOL };
        pass &= ok;
        comps.push(json!({ "component": name, "mean": m, "std_error": se, "lindblad": target, "pass": ok }));
    }
    let line = comps
        .iter()
        .map(|c| {
            format!(
                "{} {:.5}/{:.5}",
                c["component"].as_str().unwrap_or(""),
                c["mean"].as_f64().unwrap_or(0.0),
                c["lindblad"].as_f64().unwrap_or(0.0)
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok(result(
        TestKind::LindbladMean,
        Some(pass),
        format!("t = {t_check}, {} paths, mean/lindblad: {line}", states.len()),
        json!({ "t": t_check, "paths": states.len(), "components": comps }),
    ))
}

fn purity_test(sc: &Scenario, trajs: &[QubitTraj], grid: &TimeGrid) -> Result<TestResult> {
    let n = sc.analysis.checkpoints;
    let mut means = vec![0.0; n];
    for t in trajs {
        for (m, d) in means.iter_mut().zip(&t.dets) {
            *m += d;
        }
    }
    let count = trajs.len() as f64;
    means.iter_mut().for_each(|m| *m /= count);
    let times: Vec<f64> = (1..=n).map(|j| grid.time((j * grid.n_steps() + n / 2) / n)).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let last = *means.last().unwrap_or(&f64::NAN);
    let pass = monotone && last < FINAL_DET;
    let QubitParams { gamma, .. } = sc.qubit_params(StreamSpec::new(0, 0))?;
    Ok(result(
        TestKind::Purity,
        Some(pass),
        format!(
            "mean det over {n} checkpoints non-increasing: {monotone}; final {last:e} at gamma T = {}",
            gamma * grid.t_end()
        ),
        json!({ "times": times, "mean_det": means, "monotone": monotone, "final": last }),
    ))
}

/// Loads and runs a scenario file.
pub fn run_file(path: &std::path::Path, opts: &RunOptions) -> Result<RunOutput> {
    let sc = Scenario::load(path)?;
    run(&sc, opts).with_context(|| format!("running {}", path.display()))
}
