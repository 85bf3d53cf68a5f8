//! Criterion benchmarks for the alignment kernels and image-quality metrics; see `benches/`.
