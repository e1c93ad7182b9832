//! Benchmarks live in `benches/`; run them with `cargo bench -p perm1324-bench`.
