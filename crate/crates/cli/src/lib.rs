//! Config-driven experiments over `levy-core` and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod run;
