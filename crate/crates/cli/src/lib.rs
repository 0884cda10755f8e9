//! Command-line front end for geoweb: JSON job configs, a job runner, CSV
//! grids and a built-in corpus of worked jobs.

pub mod config;
pub mod corpus;
pub mod grid;
pub mod run;
