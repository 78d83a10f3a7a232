//! File formats, the learning-curve harness, the annotation service and the
//! command line front end built on `ehrner-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod service;

pub use error::{Error, Result};
