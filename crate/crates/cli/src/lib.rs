//! Command-line driver: JSON configuration, artifact layout and exit codes.

pub mod config;
pub mod pipeline;
