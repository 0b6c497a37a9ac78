//! Command-line plumbing for Author2Vec experiments: a TOML experiment
//! config, per-stage output directories with hashed manifests, and one
//! function per command.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use manifest::{Manifest, Workspace};
pub use stages::Context;
