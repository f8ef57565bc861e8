//! Benchmark harness for `qpcalc-core`; the benchmarks live in `benches/kernels.rs`.
