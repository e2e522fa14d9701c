//! Batch front-end: configuration, commands and CSV artifacts.

pub mod commands;
pub mod config;
pub mod output;
