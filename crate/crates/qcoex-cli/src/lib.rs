//! Library surface of the `qcoex` command-line driver: scenario file
//! parsing, CSV output, and the command implementations. The binary in
//! `main.rs` is a thin argument-parsing wrapper over this.

pub mod commands;
pub mod output;
pub mod scenario_file;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;
