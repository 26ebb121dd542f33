//! Configuration loading and subcommands behind the `riscov` binary.

pub mod commands;
pub mod config;
