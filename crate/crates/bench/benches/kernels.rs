// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use spikes::discrete::{filter_step, run_filter_with, sample_measurements, smooth_with};
use spikes::qubit::{sme_step, DensityMatrix, OmegaMode, QubitParams, SmeScheme, SmeStepper};
use spikes::sde::{DriveMode, InnovationStepper, JointStepper, SdeParams};
use spikes::spikes::PlateauTracker;
use spikes::{DetectionThresholds, StreamSpec};

const STEPS: u64 = 100_000;

fn photos(n: usize) -> Vec<i8> {
    let r: Vec<u8> = (0..=n).map(|k| ((k / 5000) % 2) as u8).collect();
    sample_measurements(&r, 0.3, &mut StreamSpec::new(1, 0).open()).unwrap()
}

fn sde(mode: DriveMode) -> SdeParams {
    SdeParams {
        lambda_tilde: 1.0,
        gamma: 1e4,
        dt: 1e-6,
        horizon: 1.0,
        q0: 0.5,
        seed: StreamSpec::new(2, 0),
        mode,
        r0: None,
    }
}

fn qubit(scheme: SmeScheme) -> QubitParams {
    QubitParams {
        gamma: 1e4,
        omega: 1.0,
        omega_mode: OmegaMode::Scaled,
        dt: 1e-6,
        horizon: 1.0,
        rho0: DensityMatrix { a: 1.0, d: 0.0, cr: 0.0, ci: 0.0 },
        seed: StreamSpec::new(3, 0),
        scheme,
    }
}

fn discrete(c: &mut Criterion) {
    let deltas = photos(STEPS as usize);
    let mut g = c.benchmark_group("discrete");
    g.throughput(Throughput::Elements(STEPS));
    g.bench_function("filter_step", |b| b.iter(|| deltas.iter().fold(0.5, |q, &d| filter_step(q, d, 0.3, 5e-5))));
    g.bench_function("run_filter", |b| b.iter(|| run_filter_with(black_box(&deltas), 0.3, 5e-5, 0.5)));
    g.bench_function("smooth", |b| b.iter(|| smooth_with(black_box(&deltas), 0.3, 5e-5, 0.5)));
    g.finish();
}

fn classical(c: &mut Criterion) {
    let mut g = c.benchmark_group("classical");
    g.throughput(Throughput::Elements(STEPS));
    g.bench_function("innovation_step", |b| {
        b.iter_batched_ref(
            || InnovationStepper::new(&sde(DriveMode::Innovation)).unwrap(),
            |st| (0..STEPS).fold(0.0, |acc, _| acc + st.step()),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("joint_step", |b| {
        b.iter_batched_ref(
            || JointStepper::new(&sde(DriveMode::Physical)).unwrap(),
            |st| (0..STEPS).fold(0.0, |acc, _| acc + st.step()),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("joint_step_tracked", |b| {
        b.iter_batched_ref(
            || {
                let st = JointStepper::new(&sde(DriveMode::Physical)).unwrap();
                (st, PlateauTracker::new(DetectionThresholds::default()).unwrap())
            },
            |(st, tr)| {
                for k in 1..=STEPS {
                    st.step();
                    tr.push(k as f64 * 1e-6, st.q());
                }
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn qubit_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("qubit");
    g.throughput(Throughput::Elements(STEPS));
    for (name, scheme) in [("kraus", SmeScheme::Kraus), ("euler", SmeScheme::EulerMaruyama)] {
        let p = qubit(scheme);
        g.bench_function(format!("sme_step_{name}"), |b| {
            b.iter(|| {
                let mut rho = p.rho0;
                for k in 0..STEPS {
                    let dw = if k % 2 == 0 { 1e-3 } else { -1e-3 };
                    rho = sme_step(&rho, black_box(dw), &p).0;
                }
                rho
            })
        });
        g.bench_function(format!("stepper_{name}"), |b| {
            b.iter_batched_ref(
                || SmeStepper::new(&p).unwrap(),
                |st| (0..STEPS).fold(0.0, |acc, _| acc + st.step()),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn detector(c: &mut Criterion) {
    let mut st = JointStepper::new(&sde(DriveMode::Physical)).unwrap();
    let path: Vec<f64> = (0..STEPS)
        .map(|_| {
            st.step();
            st.q()
        })
        .collect();
    let mut g = c.benchmark_group("detector");
    g.throughput(Throughput::Elements(STEPS));
    g.bench_function("tracker_push", |b| {
        b.iter(|| {
            let mut tr = PlateauTracker::new(DetectionThresholds::default()).unwrap();
            for (k, &q) in path.iter().enumerate() {
                tr.push(k as f64 * 1e-6, q);
            }
            tr.finish(STEPS as f64 * 1e-6)
        })
    });
    g.finish();
}

criterion_group!(benches, discrete, classical, qubit_steps, detector);
criterion_main!(benches);
