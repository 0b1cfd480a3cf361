//! Command-line driver: configuration, output tables and plots, the
//! pipelines behind each subcommand and the acceptance suite.

pub mod check;
pub mod config;
pub mod criteria;
pub mod pipelines;
pub mod plot;
pub mod scenario;
pub mod table;
