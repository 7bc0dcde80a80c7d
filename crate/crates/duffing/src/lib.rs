//! File formats, caches and the batch command-line driver for `duffing-core`.

pub mod cache;
pub mod commands;
pub mod config;
mod error;
pub mod export;
pub mod grid;
pub mod manifest;

pub use error::{AppError, ExitStatus};
