//! Criterion benchmarks for `ecf-toolkit`; see `benches/core.rs`.
