//! Criterion benchmarks for `pentagram-core`; see `benches/solvers.rs`.
