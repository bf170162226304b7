//! Criterion benchmarks for the posefuse pipeline; see `benches/`.
