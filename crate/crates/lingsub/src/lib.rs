//! Artifact formats, reports and the command-line pipeline around
//! `lingsub-core`.

pub mod cli;
pub mod error;
pub mod manifest;
pub mod report;
pub mod store;
pub mod tsv;

pub use error::{Error, Result};
