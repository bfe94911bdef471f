//! Classical anomaly detectors: Isolation Forest, COPOD and a one-class SVM
//! over random Fourier features. Every detector scores with "higher = more
//! anomalous".

mod copod;
mod iforest;
mod ocsvm;

pub use copod::{copod_fit, skewness, CopodModel};
pub use iforest::{
    average_path_length, iforest_fit, IForestConfig, IsoNode, IsolationForestModel, IsolationTree,
};
pub use ocsvm::{ocsvm_fit, OcsvmConfig, OcsvmModel};

use alloc::vec::Vec;

use crate::diffusion::DiffusionDetector;
use crate::numcore::{RngStream, Tensor};
use crate::Result;

/// Any fitted detector behind one scoring call.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorModel {
    Diffusion(DiffusionDetector),
    IForest(IsolationForestModel),
    Copod(CopodModel),
    Ocsvm(OcsvmModel),
}

impl DetectorModel {
    pub fn kind(&self) -> &'static str {
        match self {
            DetectorModel::Diffusion(_) => "ddpm",
            DetectorModel::IForest(_) => "iforest",
            DetectorModel::Copod(_) => "copod",
            DetectorModel::Ocsvm(_) => "ocsvm",
        }
    }

    /// `rng` is consumed only by the stochastic diffusion scorer.
    pub fn score(&self, x: &Tensor, rng: &mut RngStream) -> Result<Vec<f64>> {
        match self {
            DetectorModel::Diffusion(m) => m.anomaly_score(x, rng),
            DetectorModel::IForest(m) => m.score(x),
            DetectorModel::Copod(m) => m.score(x),
            DetectorModel::Ocsvm(m) => m.score(x),
        }
    }
}
