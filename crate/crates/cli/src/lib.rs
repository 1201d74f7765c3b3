//! Command-line front end for `sparsepath`: CSV ingestion, path export, model selection
//! reports, regularized fits and the simulation study.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod simulate;
