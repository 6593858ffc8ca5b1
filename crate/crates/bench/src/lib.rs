//! Benchmark fixtures. The benches live in `benches/`.
