//! The `hkd` command line: configuration parsing and subcommands.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 I/O or file
//! format error, 4 numeric failure. `HKD_THREADS` caps the worker pool.

mod commands;
mod config;

pub use commands::{main_with_args, read_mask_file, run, Cli, Command, THREADS_ENV};
pub use config::{AnalysisConfig, RunConfig, TeacherConfig, KEYS};
