//! Dataset loading, experiment drivers, file formats and the command line
//! front end for noisy NNGP experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

pub mod cli;
pub mod config;
pub mod data;
pub mod experiments;
pub mod gramfile;
pub mod plot;
pub mod verify;

pub use nngp_core as core;
use nngp_core::NngpError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] NngpError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
