//! Experiment harness for the very-weak porous-medium scheme: configuration,
//! experiment drivers, statistics and output formats.

pub mod config;
pub mod experiments;
pub mod output;
pub mod stats;
