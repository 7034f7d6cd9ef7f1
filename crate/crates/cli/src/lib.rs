//! Configuration layer of the `fiberdim` command-line tool.

pub mod config;
