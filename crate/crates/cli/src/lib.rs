//! File formats, configuration and the benchmark harness around
//! `anodiff-core`.

pub mod bench;
mod bytes;
pub mod commands;
pub mod config;
pub mod dataset_io;
mod error;
pub mod model_io;

pub use error::{AppError, AppResult};
