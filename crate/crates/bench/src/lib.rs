// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for the simulation kernels; see `benches/`.
