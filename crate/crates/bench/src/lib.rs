//! Criterion benchmarks for the hoodmine algorithms live in `benches/`.
