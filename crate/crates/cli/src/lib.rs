//! Command-line front end for the amphase solver: configuration layering,
//! the tables behind each subcommand, and CSV / JSON-lines I/O.

pub mod commands;
pub mod config;
pub mod output;
