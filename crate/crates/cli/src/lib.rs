//! Command-line workflows over the `purcell` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use args::{CacheAction, Cli, Command, Global};
