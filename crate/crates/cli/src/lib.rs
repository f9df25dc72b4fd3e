//! Command-line front end of the plsim toolkit: configuration, run
//! orchestration, checkpoints, reports and the acceptance self-test.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;
