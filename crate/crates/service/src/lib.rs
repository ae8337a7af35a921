//! CLI and HTTP front end for geosieve.
//!
//! [`query`] holds the request handling both front ends share; [`api`] is
//! the axum router and [`cli`] the command-line entry points.

pub mod api;
pub mod cache;
pub mod cli;
pub mod query;
pub mod render;
