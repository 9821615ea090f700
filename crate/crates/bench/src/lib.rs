//! Criterion benchmarks for the grounding pipeline; see `benches/`.
