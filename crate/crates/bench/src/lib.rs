//! Criterion benchmarks for the haptic loop; see `benches/`.
