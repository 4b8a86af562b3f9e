// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite: one PASS/FAIL line per criterion, thresholds pinned in
//! `spikes_cli::criteria`. Pass criterion numbers to run a subset:
//! `cargo test -p spikes-cli --test acceptance -- 4 9`.

use std::process::ExitCode;
use std::time::Instant;

use spikes_cli::acceptance::{check, parse_selection, CRITERIA};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let ids: Vec<u8> = if args.is_empty() {
        CRITERIA.iter().map(|c| c.id).collect()
    } else {
        match args.iter().map(|a| parse_selection(a)).collect::<Result<Vec<_>, _>>() {
            Ok(v) => v.into_iter().flatten().collect(),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    };
    println!("\nrunning {} acceptance criteria", ids.len());
    let start = Instant::now();
    let mut failed = Vec::new();
    for id in ids {
        match check(id, 1) {
            Ok(o) => {
                println!("{}", o.line());
                if !o.pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("AC{id:<2} FAIL  error: {e:#}");
                failed.push(id);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if failed.is_empty() {
        println!("\nacceptance result: ok. all criteria passed in {secs:.1}s");
        ExitCode::SUCCESS
    } else {
        let list: Vec<String> = failed.iter().map(|id| format!("AC{id}")).collect();
        println!("\nacceptance result: FAILED. {} failed ({}) in {secs:.1}s", failed.len(), list.join(", "));
        ExitCode::FAILURE
    }
}
