// SPDX-License-Identifier: Apache-2.0

//! Data behind the published figures, one column file per panel.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

use crate::config::Scenario;
use crate::output::{write_overlay, write_plot_columns, write_record_csv};
use crate::runner::{run, RunOptions, RunOutput};

const GAMMAS: [(f64, &str); 4] = [(1e-2, "1e-2"), (1.0, "1e0"), (1e2, "1e2"), (1e4, "1e4")];

fn classical_panel(gamma: f64, seed: u64) -> String {
    format!(
        r#"
[model]
kind = "classical-sde"
lambda_tilde = 1.0
gamma = {gamma:e}
mode = "physical"
[grid]
dt = 1e-6
T = 10.0
[ensemble]
master_seed = {seed}
[output]
stride = 100
"#
    )
}

fn qubit_panel(gamma: f64, seed: u64) -> String {
    format!(
        r#"
[model]
kind = "qubit"
gamma = {gamma:e}
omega = 1.0
omega_mode = "affine"
[grid]
dt = 1e-6
T = 10.0
[ensemble]
master_seed = {seed}
[output]
stride = 100
"#
    )
}

fn spike_detail(seed: u64) -> String {
    format!(
        r#"
[model]
kind = "classical-sde"
lambda_tilde = 1.0
gamma = 1e4
mode = "physical"
R0 = 0
[grid]
dt = 1e-6
T = 5.0
[ensemble]
master_seed = {seed}
[analysis.thresholds]
q_enter = 0.1
q_exit = 0.005
jump_level = 0.1
[output]
stride = 10
"#
    )
}

fn smoothed(seed: u64) -> String {
    format!(
        r#"
[model]
kind = "discrete-toy"
epsilon = 0.3
lambda = 5e-5
n_steps = 200000
[ensemble]
master_seed = {seed}
[output]
stride = 10
"#
    )
}

fn simulate(text: &str, workers: usize) -> Result<RunOutput> {
    let sc = Scenario::from_toml(text)?;
    run(&sc, &RunOptions { workers, seed: None, analyze: false })
}

fn write_panel(out: &RunOutput, dir: &Path, stem: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let rec = &out.records[0];
    let csv = dir.join(format!("{stem}.csv"));
    write_record_csv(rec, &csv)?;
    let dat = dir.join(format!("{stem}.dat"));
    write_plot_columns(rec, &dat)?;
    written.extend([csv, dat]);
    Ok(())
}

/// Writes the data of figure `n` (2 to 5) into `dir`.
pub fn reproduce_figure(n: u8, dir: &Path, seed: u64, workers: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match n {
        2 | 4 => {
            for (gamma, tag) in GAMMAS {
                let text = if n == 2 { classical_panel(gamma, seed) } else { qubit_panel(gamma, seed) };
                let out = simulate(&text, workers)?;
                write_panel(&out, dir, &format!("fig{n}_gamma_{tag}"), &mut written)?;
            }
        }
        3 => {
            let out = simulate(&spike_detail(seed), workers)?;
            write_panel(&out, dir, "fig3_trajectory", &mut written)?;
            let p = dir.join("fig3_spikes.dat");
            write_overlay(out.records[0].stream_id, &out.events, &p)?;
            written.push(p);
        }
        5 => {
            let out = simulate(&smoothed(seed), workers)?;
            write_panel(&out, dir, "fig5_smoothed", &mut written)?;
        }
        other => bail!("no figure {other}; choose 2, 3, 4 or 5"),
    }
    Ok(written)
}
