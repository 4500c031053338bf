//! File formats, the command-line front end and a threaded trainer runner for
//! [`jcas_core`].

#![forbid(unsafe_code)]

pub use jcas_core as core;

pub mod channels;
pub mod checkpoint;
pub mod cmd;
pub mod codebook;
pub mod config;
mod error;
pub mod records;
pub mod runner;
pub mod scene;

pub use error::{FormatError, Result};
