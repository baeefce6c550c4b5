//! Persistence and interfaces for the tug-of-war agent: a directory-backed
//! replay library, a read-only JSON API over it, and the `tow` command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod library;

pub use config::ServiceConfig;
pub use error::{Error, Result};
pub use library::ReplayLibrary;
