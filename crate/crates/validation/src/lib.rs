//! Acceptance suite for the amphase solver. The criteria live in
//! `tests/acceptance.rs` and run with `cargo test -p amphase-validation --test acceptance`.
