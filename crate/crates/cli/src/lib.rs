//! Library side of the `ecbc` command: scenario files, commands and the
//! acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod scenario;
