//! Fitted detector files.
//!
//! Diffusion detectors use `ADM1`: magic, `u8` version, `u8` backbone
//! (1 = MLP, 2 = DiT), the backbone hyperparameters, `u64` parameter count
//! and each tensor (`u8` ndim, `u64` dims, `f64` values), the schedule
//! (`u64` T and T betas), the scoring block (`u64` t*, `u64` K, `u8` mode,
//! `u64` scoring seed) and the standardizer (`u64` d, d means, d stds).
//!
//! Baselines use `ADB1`: magic, `u8` version, `u8` method (1 = IForest,
//! 2 = COPOD, 3 = OCSVM) and a per-method block.

use std::fs;
use std::path::Path;

use anodiff_core::baselines::{
    CopodModel, DetectorModel, IsoNode, IsolationForestModel, IsolationTree, OcsvmModel,
};
use anodiff_core::denoisers::{
    Activation, Backbone, Denoiser, DitConfig, DitDenoiser, MlpConfig, MlpDenoiser,
};
use anodiff_core::diffusion::{DiffusionDetector, NoiseSchedule, ScoringConfig, ScoringMode, Standardizer};

use crate::bytes::{DecodeResult, Decoder, Encoder};
use crate::error::{AppError, AppResult};

const DIFFUSION_MAGIC: &[u8; 4] = b"ADM1";
const BASELINE_MAGIC: &[u8; 4] = b"ADB1";
const VERSION: u8 = 1;

/// A detector plus the seed its stochastic scorer starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub detector: DetectorModel,
    /// Only diffusion files store it; baselines decode as 0.
    pub score_seed: u64,
}

pub fn encode_model(m: &SavedModel) -> Vec<u8> {
    match &m.detector {
        DetectorModel::Diffusion(det) => encode_diffusion(det, m.score_seed),
        other => encode_baseline(other),
    }
}

fn encode_diffusion(det: &DiffusionDetector, seed: u64) -> Vec<u8> {
    let mut e = Encoder::new(DIFFUSION_MAGIC);
    e.u8(VERSION);
    match &det.denoiser {
        Backbone::Mlp(m) => {
            let c = m.config();
            e.u8(1);
            e.usize(c.data_dim);
            e.usize(c.hidden.len());
            c.hidden.iter().for_each(|&h| e.usize(h));
            e.usize(c.emb_dim);
            e.u8(c.activation.id());
        }
        Backbone::Dit(m) => {
            let c = m.config();
            e.u8(2);
            for v in [c.data_dim, c.patch, c.width, c.blocks, c.heads, c.ff_width, c.emb_dim] {
                e.usize(v);
            }
            e.u8(c.pos_embedding as u8);
        }
    }
    let params = det.denoiser.params();
    e.usize(params.len());
    params.iter().for_each(|p| e.tensor(p));
    e.f64s(det.schedule.betas());
    e.usize(det.scoring.t_star);
    e.usize(det.scoring.repeats);
    e.u8(det.scoring.mode.id());
    e.u64(seed);
    e.f64s(&det.standardizer.mean);
    e.f64s(&det.standardizer.std);
    e.buf
}

fn encode_baseline(m: &DetectorModel) -> Vec<u8> {
    let mut e = Encoder::new(BASELINE_MAGIC);
    e.u8(VERSION);
    match m {
        DetectorModel::IForest(f) => {
            e.u8(1);
            e.usize(f.subsample);
            e.usize(f.height_limit);
            e.usize(f.dim);
            e.usize(f.trees.len());
            for t in &f.trees {
                e.usize(t.nodes.len());
                for n in &t.nodes {
                    match *n {
                        IsoNode::Leaf { size } => {
                            e.u8(0);
                            e.usize(size);
                        }
                        IsoNode::Split { feature, value, left, right } => {
                            e.u8(1);
                            e.usize(feature);
                            e.f64(value);
                            e.usize(left);
                            e.usize(right);
                        }
                    }
                }
            }
        }
        DetectorModel::Copod(c) => {
            e.u8(2);
            e.usize(c.sorted.len());
            c.sorted.iter().for_each(|col| e.f64s(col));
            e.f64s(&c.skewness);
        }
        DetectorModel::Ocsvm(o) => {
            e.u8(3);
            e.f64(o.nu);
            e.f64(o.gamma);
            e.tensor(&o.omega);
            e.f64s(&o.phase);
            e.f64s(&o.w);
            e.f64(o.rho);
        }
        DetectorModel::Diffusion(_) => unreachable!("diffusion models use ADM1"),
    }
    e.buf
}

pub fn decode_model(bytes: &[u8]) -> DecodeResult<SavedModel> {
    if bytes.len() < 4 {
        return Err("truncated: file shorter than its magic".into());
    }
    let m = match &bytes[..4] {
        b"ADM1" => decode_diffusion(bytes)?,
        b"ADB1" => SavedModel {
            detector: decode_baseline(bytes)?,
            score_seed: 0,
        },
        other => {
            return Err(format!(
                "bad magic {:?}, expected \"ADM1\" or \"ADB1\"",
                String::from_utf8_lossy(other)
            ))
        }
    };
    Ok(m)
}

fn core_err(e: anodiff_core::Error) -> String {
    e.to_string()
}

fn decode_diffusion(bytes: &[u8]) -> DecodeResult<SavedModel> {
    let mut d = Decoder::new(bytes);
    d.expect_magic(DIFFUSION_MAGIC)?;
    check_version(d.u8()?)?;
    let kind = d.u8()?;
    let read_params = |d: &mut Decoder| -> DecodeResult<Vec<_>> {
        let n = d.usize()?;
        (0..n).map(|_| d.tensor()).collect()
    };
    let denoiser: Backbone = match kind {
        1 => {
            let data_dim = d.usize()?;
            let layers = d.usize()?;
            let hidden = (0..layers).map(|_| d.usize()).collect::<DecodeResult<_>>()?;
            let emb_dim = d.usize()?;
            let act = d.u8()?;
            let activation = Activation::from_id(act).ok_or(format!("unknown activation id {act}"))?;
            let config = MlpConfig { data_dim, hidden, emb_dim, activation };
            MlpDenoiser::from_parts(config, read_params(&mut d)?).map_err(core_err)?.into()
        }
        2 => {
            let mut v = [0usize; 7];
            for x in v.iter_mut() {
                *x = d.usize()?;
            }
            let pos_embedding = match d.u8()? {
                0 => false,
                1 => true,
                b => return Err(format!("position flag {b} is not 0 or 1")),
            };
            let config = DitConfig {
                data_dim: v[0],
                patch: v[1],
                width: v[2],
                blocks: v[3],
                heads: v[4],
                ff_width: v[5],
                emb_dim: v[6],
                pos_embedding,
            };
            DitDenoiser::from_parts(config, read_params(&mut d)?).map_err(core_err)?.into()
        }
        k => return Err(format!("unknown backbone id {k}")),
    };
    let schedule = NoiseSchedule::from_betas(d.f64s()?).map_err(core_err)?;
    let t_star = d.usize()?;
    let repeats = d.usize()?;
    let mode_id = d.u8()?;
    let mode = ScoringMode::from_id(mode_id).ok_or(format!("unknown scoring mode {mode_id}"))?;
    let score_seed = d.u64()?;
    let mean = d.f64s()?;
    let std = d.f64s()?;
    d.finish()?;
    let det = DiffusionDetector::new(
        denoiser,
        schedule,
        ScoringConfig { t_star, repeats, mode },
        Standardizer { mean, std },
    )
    .map_err(core_err)?;
    Ok(SavedModel {
        detector: DetectorModel::Diffusion(det),
        score_seed,
    })
}

fn check_version(v: u8) -> DecodeResult<()> {
    if v != VERSION {
        return Err(format!("unsupported version {v}"));
    }
    Ok(())
}

fn decode_baseline(bytes: &[u8]) -> DecodeResult<DetectorModel> {
    let mut d = Decoder::new(bytes);
    d.expect_magic(BASELINE_MAGIC)?;
    check_version(d.u8()?)?;
    let model = match d.u8()? {
        1 => {
            let subsample = d.usize()?;
            let height_limit = d.usize()?;
            let dim = d.usize()?;
            let n_trees = d.usize()?;
            let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
            for _ in 0..n_trees {
                let n_nodes = d.usize()?;
                let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
                for _ in 0..n_nodes {
                    nodes.push(match d.u8()? {
                        0 => IsoNode::Leaf { size: d.usize()? },
                        1 => IsoNode::Split {
                            feature: d.usize()?,
                            value: d.f64()?,
                            left: d.usize()?,
                            right: d.usize()?,
                        },
                        t => return Err(format!("unknown tree node tag {t}")),
                    });
                }
                check_tree(&nodes, dim)?;
                trees.push(IsolationTree { nodes });
            }
            if trees.is_empty() {
                return Err("isolation forest without trees".into());
            }
            DetectorModel::IForest(IsolationForestModel { subsample, height_limit, dim, trees })
        }
        2 => {
            let dims = d.usize()?;
            let sorted = (0..dims).map(|_| d.f64s()).collect::<DecodeResult<Vec<_>>>()?;
            let skewness = d.f64s()?;
            if skewness.len() != dims || sorted.iter().any(|c| c.is_empty()) {
                return Err("inconsistent COPOD block".into());
            }
            DetectorModel::Copod(CopodModel { sorted, skewness })
        }
        3 => {
            let nu = d.f64()?;
            let gamma = d.f64()?;
            let omega = d.tensor()?;
            let phase = d.f64s()?;
            let w = d.f64s()?;
            let rho = d.f64()?;
            if omega.ndim() != 2 || omega.rows() != phase.len() || w.len() != phase.len() {
                return Err("inconsistent OCSVM block".into());
            }
            DetectorModel::Ocsvm(OcsvmModel { omega, phase, w, rho, nu, gamma })
        }
        m => return Err(format!("unknown baseline method id {m}")),
    };
    d.finish()?;
    Ok(model)
}

/// Child links must point forward and features must exist, so scoring
/// cannot loop or index out of range.
fn check_tree(nodes: &[IsoNode], dim: usize) -> DecodeResult<()> {
    if nodes.is_empty() {
        return Err("empty isolation tree".into());
    }
    for (i, n) in nodes.iter().enumerate() {
        if let IsoNode::Split { feature, left, right, .. } = *n {
            if feature >= dim || left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                return Err(format!("invalid split node {i}"));
            }
        }
    }
    Ok(())
}

pub fn save_model(path: &Path, m: &SavedModel) -> AppResult<()> {
    fs::write(path, encode_model(m)).map_err(|e| AppError::io(path, e))
}

pub fn load_model(path: &Path) -> AppResult<SavedModel> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_model(&bytes).map_err(|m| AppError::format(path, m))
}
