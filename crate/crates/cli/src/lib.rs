//! Command line driver for the plate solvers and error estimators.

pub mod config;
pub mod output;
pub mod run;
