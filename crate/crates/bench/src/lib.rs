//! Criterion benchmarks for the DTW kernel and the evaluation pipeline.
