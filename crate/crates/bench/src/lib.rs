//! Criterion benchmarks for the irisgraph pipeline; see `benches/`.
