//! File formats, run configuration and the command-line pipeline around
//! [`uavfusion_core`].

pub mod cli;
pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod msfr;
pub mod report;
pub mod weights;

pub use error::{Error, Result};
