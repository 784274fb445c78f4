//! Criterion benchmarks for the hypkob crate live in the benches directory.
