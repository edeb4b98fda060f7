//! Benchmarks for the huberval crate.
