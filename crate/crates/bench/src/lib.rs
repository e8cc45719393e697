//! Criterion benchmarks for the planners; see `benches/`.
