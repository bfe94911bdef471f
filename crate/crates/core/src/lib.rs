//! Diffusion-based anomaly detection with the classical baselines it is
//! usually compared against.
//!
//! The crate is `no_std` and only needs an allocator. Everything touching the
//! filesystem, configuration files or the command line lives in the `anodiff`
//! companion crate.
//!
//! Module map:
//!
//! * [`numcore`]: dense `f64` tensors, a reverse-mode autodiff tape and a
//!   seeded counter-based RNG.
//! * [`denoisers`]: noise-prediction networks (MLP and a small diffusion
//!   transformer), sinusoidal time embeddings and Adam.
//! * [`diffusion`]: noise schedules, forward noising, ancestral sampling,
//!   the simple noise-matching loss, variational-bound diagnostics and
//!   reconstruction-error scoring.
//! * [`baselines`]: Isolation Forest, COPOD and a random-Fourier-feature
//!   one-class SVM.
//! * [`evalmetrics`]: AUC-ROC with midrank ties, ROC curves and result
//!   aggregation.
//! * [`datasets`]: in-memory datasets, synthetic generators and one-class
//!   train/test splits.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod datasets;
pub mod denoisers;
pub mod diffusion;
mod error;
pub mod evalmetrics;
pub mod numcore;

pub use error::{Error, Result};
