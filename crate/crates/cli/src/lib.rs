//! Configuration and experiment orchestration behind the `fkneuro` binary.

pub mod config;
pub mod experiment;
