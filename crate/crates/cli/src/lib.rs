//! Command line and HTTP front end for the schemakit library.

pub mod config;
pub mod jobs;
pub mod ops;
pub mod server;
pub mod store;
