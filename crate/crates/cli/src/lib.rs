// SPDX-License-Identifier: Apache-2.0

//! Scenario-driven front end: configuration, ensemble runs, tests, files.

pub mod acceptance;
pub mod config;
pub mod criteria;
pub mod figures;
pub mod output;
pub mod runner;

pub use config::{ConfigError, Scenario};
pub use runner::{run, RunOptions, RunOutput, RunReport};

/// Process exit status for an error: 3 for a refused resource budget, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(spikes::Error::ResourceGuard(_)) = cause.downcast_ref::<spikes::Error>() {
            return 3;
        }
    }
    2
}
