//! Criterion benchmarks for the simulator engines live in `benches/`.
