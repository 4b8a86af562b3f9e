// SPDX-License-Identifier: Apache-2.0

use spikes::discrete::{
    brute_force_posterior, run_filter_with, simulate_trace, smooth_with, DiscreteModelParams, PosteriorMode,
};
use spikes::sde::{simulate_joint, DriveMode, SdeParams};
use spikes::spikes::stats::mean_sd;
use spikes::StreamSpec;

/// Excursions of `Q` above `level` that start and end inside one `R = 0` stretch,
/// after `Q` has first come below `level` there.
fn excursions_on_right(q: &[f64], r: &[u8], level: f64) -> u64 {
    let mut count = 0;
    let (mut settled, mut above) = (false, false);
    for (k, (&qk, &rk)) in q.iter().zip(r).enumerate() {
        if rk == 1 || (k > 0 && r[k - 1] != rk) {
            settled = false;
            above = false;
            if rk == 1 {
                continue;
            }
        }
        if !settled {
            settled = qk <= level;
        } else if !above && qk > level {
            above = true;
        } else if above && qk <= level {
            above = false;
            count += 1;
        }
    }
    count
}

#[test]
fn spikes_emerge_without_rescaling() {
    for stream in 0..20 {
        let p = DiscreteModelParams::new(0.9, 1e-4, 1_000_000, StreamSpec::new(7, stream));
        let tr = simulate_trace(&p, false).unwrap();
        let n = excursions_on_right(&tr.q, &tr.r, 0.2);
        assert!(n >= 1, "stream {stream}: no excursion above 0.2");
    }
}

#[test]
fn oracle_agreement_random_instances() {
    let mut rng = StreamSpec::new(3, 0).open();
    for _ in 0..40 {
        let n = 1 + (rng.uniform() * 12.0) as usize;
        let eps = 0.05 + 0.9 * rng.uniform();
        let lambda = 0.5 * rng.uniform();
        let q0 = rng.uniform();
        let deltas: Vec<i8> = (0..n).map(|_| if rng.uniform() < 0.5 { 1 } else { -1 }).collect();
        let f = run_filter_with(&deltas, eps, lambda, q0);
        let s = smooth_with(&deltas, eps, lambda, q0);
        let mut p = DiscreteModelParams::new(eps, lambda, n, StreamSpec::new(0, 0));
        p.q0 = q0;
        let bf = brute_force_posterior(&deltas, &p, PosteriorMode::Filtered).unwrap();
        let bs = brute_force_posterior(&deltas, &p, PosteriorMode::Smoothed).unwrap();
        for k in 0..=n {
            assert!((f[k] - bf[k]).abs() <= 1e-12);
            assert!((s[k] - bs[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn discrete_chain_converges_to_sde() {
    let (gamma, lt, dt, horizon): (f64, f64, f64, f64) = (100.0, 1.0, 1e-4, 0.5);
    let n = 2000;
    let n_steps = (horizon / dt).round() as usize;
    let eps = gamma.sqrt() * dt.sqrt() / 2.0;
    let mut disc = Vec::with_capacity(n);
    let mut cont = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let mut p = DiscreteModelParams::new(eps, lt * dt / 2.0, n_steps, StreamSpec::new(11, i));
        p.q0 = 0.5;
        disc.push(*simulate_trace(&p, false).unwrap().q.last().unwrap());
        let sp = SdeParams {
            lambda_tilde: lt,
            gamma,
            dt,
            horizon,
            q0: 0.5,
            seed: StreamSpec::new(12, i),
            mode: DriveMode::Physical,
            r0: None,
        };
        cont.push(*simulate_joint(&sp).unwrap().q.last().unwrap());
    }
    let (md, sd_d) = mean_sd(&disc);
    let (mc, sd_c) = mean_sd(&cont);
    let se = ((sd_d * sd_d + sd_c * sd_c) / n as f64).sqrt();
    assert!((md - mc).abs() <= 3.0 * se, "means {md} vs {mc}");
    // Standard error of a sample variance, assuming bounded fourth moments.
    let (vd, vc) = (sd_d * sd_d, sd_c * sd_c);
    let var_se = (2.0 / (n as f64 - 1.0)).sqrt() * (vd + vc) / 2.0 * 2f64.sqrt();
    assert!((vd - vc).abs() <= 4.0 * var_se, "variances {vd} vs {vc}");
}
