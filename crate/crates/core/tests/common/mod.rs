//! Shared helpers for integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod criteria;
pub mod oracle;
