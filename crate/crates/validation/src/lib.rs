//! Acceptance checks for the workspace. The checks live in `tests/acceptance.rs` and run
//! with `cargo test -p vnb-validation --test acceptance`; each prints one pass/fail line.
