//! Criterion benchmarks for the samplers and engines live under `benches/`.
