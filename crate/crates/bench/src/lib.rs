//! Benchmarks for `moran-assort` live under `benches/`.
