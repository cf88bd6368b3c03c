//! Criterion benchmarks for the emulation, receiver and localization hot paths; see `benches/`.
