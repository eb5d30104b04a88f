//! Problem-file parsing and deterministic output formatting for the
//! `fraclin` binary. Split out of `main.rs` so integration tests can drive
//! the same code paths the binary uses.

pub mod output;
pub mod problem;
