// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::StreamSpec;

/// Trajectories `base_stream_id .. base_stream_id + n_trajectories` of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub master_seed: u64,
    pub base_stream_id: u64,
    pub n_trajectories: u64,
}

impl EnsembleSpec {
    pub fn streams(&self) -> impl Iterator<Item = StreamSpec> + '_ {
        (0..self.n_trajectories).map(|i| StreamSpec::new(self.master_seed, self.base_stream_id + i))
    }
}

/// Runs `f` once per stream on `workers` threads. Results come back in
/// stream-id order, so the output does not depend on `workers`.
pub fn run_ensemble<T, F>(spec: &EnsembleSpec, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(StreamSpec) -> Result<T> + Sync + Send,
{
    if workers == 0 {
        return Err(invalid("workers must be >= 1"));
    }
    let streams: Vec<StreamSpec> = spec.streams().collect();
    if workers == 1 {
        return streams.into_iter().map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| streams.into_par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let spec = EnsembleSpec { master_seed: 3, base_stream_id: 10, n_trajectories: 37 };
        let f = |s: StreamSpec| Ok(s.open().next_u64() ^ s.stream_id);
        let a = run_ensemble(&spec, 1, f).unwrap();
        let b = run_ensemble(&spec, 4, f).unwrap();
        assert_eq!(a, b);
        assert!(run_ensemble(&spec, 0, f).is_err());
    }
}
