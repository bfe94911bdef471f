//! The method × dataset × seed benchmark.

use std::collections::BTreeMap;
use std::time::Instant;

use anodiff_core::baselines::{copod_fit, iforest_fit, ocsvm_fit, DetectorModel};
use anodiff_core::datasets::{gen_blobs, gen_ring, split, Dataset, SplitSpec};
use anodiff_core::denoisers::{Backbone, DitDenoiser, MlpDenoiser};
use anodiff_core::diffusion::DiffusionDetector;
use anodiff_core::evalmetrics::{aggregate, auc_roc, roc_points, BenchmarkResult, LabeledScores};
use anodiff_core::numcore::{mix64, RngStream, Tensor};
use rayon::prelude::*;

use crate::config::{Config, DataSource, Method};
use crate::dataset_io::load_dataset;
use crate::error::{AppError, AppResult};
use crate::model_io::SavedModel;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// `mix64(master ⊕ FNV-1a(dataset ␟ method ␟ seed))`, with the seed written
/// in decimal and `␟` the unit separator `0x1F`.
pub fn cell_seed(master: u64, dataset: &str, method: &str, seed: u64) -> u64 {
    let key = format!("{dataset}\u{1f}{method}\u{1f}{seed}");
    mix64(master ^ fnv1a64(key.as_bytes()))
}

/// Seed for generating and splitting a dataset: the cell seed with an empty
/// method name, so every method sees the same rows.
pub fn data_seed(master: u64, dataset: &str, seed: u64) -> u64 {
    cell_seed(master, dataset, "", seed)
}

/// Fits `method` on `train`; diffusion methods also return their loss trace.
pub fn fit_method(
    method: Method,
    cfg: &Config,
    train: &Tensor,
    seed: u64,
) -> AppResult<(SavedModel, Option<Vec<f64>>)> {
    let d = train.cols();
    let diffusion = |backbone: Backbone| -> AppResult<(SavedModel, Option<Vec<f64>>)> {
        let tc = cfg.train_config(mix64(seed ^ 1), train.rows());
        let (det, trace) =
            DiffusionDetector::fit(backbone, train, cfg.schedule()?, cfg.scoring(), &tc)?;
        let model = SavedModel {
            detector: DetectorModel::Diffusion(det),
            score_seed: mix64(seed ^ 2),
        };
        Ok((model, Some(trace)))
    };
    let baseline = |detector: DetectorModel| SavedModel { detector, score_seed: 0 };
    let mut rng = RngStream::new(seed);
    match method {
        Method::DdpmMlp => diffusion(MlpDenoiser::new(cfg.mlp_config(d), &mut rng)?.into()),
        Method::DdpmDit => diffusion(DitDenoiser::new(cfg.dit_config(d), &mut rng)?.into()),
        Method::Iforest => Ok((
            baseline(DetectorModel::IForest(iforest_fit(train, &cfg.iforest_config(seed))?)),
            None,
        )),
        Method::Ocsvm => Ok((
            baseline(DetectorModel::Ocsvm(ocsvm_fit(train, &cfg.ocsvm_config(seed))?)),
            None,
        )),
        Method::Copod => Ok((baseline(DetectorModel::Copod(copod_fit(train)?)), None)),
    }
}

pub fn score_model(model: &SavedModel, x: &Tensor) -> AppResult<Vec<f64>> {
    let mut rng = RngStream::new(model.score_seed);
    Ok(model.detector.score(x, &mut rng)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub auc: f64,
    pub seconds: f64,
    pub roc: Vec<(f64, f64)>,
    pub loss_trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub outcome: Result<CellResult, String>,
}

/// Materializes one dataset for one seed. Generators draw from the data
/// seed; files are used as given.
pub fn build_dataset(cfg: &Config, name: &str, source: &str, seed: u64) -> AppResult<Dataset> {
    let s = data_seed(cfg.bench.master_seed, name, seed);
    let mut ds = match DataSource::parse(source, &cfg.base_dir)? {
        DataSource::Ring { n, anomaly_frac } => gen_ring(n, anomaly_frac, s)?,
        DataSource::Blobs { n, d, anomaly_frac } => gen_blobs(n, d, anomaly_frac, s)?,
        DataSource::File(path) => load_dataset(&path)?,
    };
    ds.name = name.to_string();
    Ok(ds)
}

fn run_cell(cfg: &Config, ds: &Dataset, method: Method, seed: u64) -> AppResult<CellResult> {
    let start = Instant::now();
    let spec = SplitSpec {
        train_fraction: cfg.bench.train_fraction,
        contamination: cfg.bench.contamination,
        seed: mix64(data_seed(cfg.bench.master_seed, &ds.name, seed)),
    };
    let (train, test) = split(ds, &spec)?;
    let cs = cell_seed(cfg.bench.master_seed, &ds.name, method.name(), seed);
    let (model, loss_trace) = fit_method(method, cfg, &train.features, cs)?;
    let scores = score_model(&model, &test.features)?;
    let ls = LabeledScores::new(scores, test.labels.clone().unwrap_or_default())?;
    Ok(CellResult {
        auc: auc_roc(&ls)?,
        seconds: start.elapsed().as_secs_f64(),
        roc: roc_points(&ls)?,
        loss_trace,
    })
}

/// Runs every (dataset, method, seed) cell, in parallel, returning them in
/// that order. A failing cell is recorded, not propagated.
pub fn run_bench(cfg: &Config) -> AppResult<Vec<Cell>> {
    cfg.check_bench()?;
    let mut inputs = Vec::new();
    for entry in &cfg.data {
        for &seed in &cfg.bench.seeds {
            inputs.push((entry, seed, build_dataset(cfg, &entry.name, &entry.source, seed)));
        }
    }
    let mut jobs = Vec::new();
    for (entry, seed, ds) in &inputs {
        for &method in &cfg.bench.methods {
            jobs.push((entry.name.clone(), method, *seed, ds));
        }
    }
    let mut cells: Vec<Cell> = jobs
        .into_par_iter()
        .map(|(dataset, method, seed, ds)| {
            let outcome = match ds {
                Ok(ds) => run_cell(cfg, ds, method, seed).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            Cell { dataset, method, seed, outcome }
        })
        .collect();
    let order: BTreeMap<&str, usize> = cfg
        .data
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.as_str(), i))
        .collect();
    cells.sort_by_key(|c| (order[c.dataset.as_str()], c.method, c.seed));
    Ok(cells)
}

/// `method,dataset,seed,auc,seconds`; failed cells carry `error` as AUC.
pub fn results_csv(cells: &[Cell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "dataset", "seed", "auc", "seconds"]).unwrap();
    for c in cells {
        let (auc, secs) = match &c.outcome {
            Ok(r) => (r.auc.to_string(), format!("{:.3}", r.seconds)),
            Err(_) => ("error".to_string(), String::new()),
        };
        w.write_record([c.method.name(), &c.dataset, &c.seed.to_string(), &auc, &secs])
            .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn benchmark_results(cells: &[Cell]) -> Vec<BenchmarkResult> {
    cells
        .iter()
        .filter_map(|c| {
            c.outcome.as_ref().ok().map(|r| BenchmarkResult {
                method: c.method.name().to_string(),
                dataset: c.dataset.clone(),
                seed: c.seed,
                auc: r.auc,
                seconds: r.seconds,
            })
        })
        .collect()
}

/// Datasets as rows, methods as columns, AUC in percent as
/// `mean ± std`; the best mean in each row is bold.
pub fn markdown_table(cfg: &Config, cells: &[Cell]) -> String {
    let rows = aggregate(&benchmark_results(cells));
    let seeds: Vec<String> = cfg.bench.seeds.iter().map(|s| s.to_string()).collect();
    let mut out = format!(
        "AUC-ROC (%), mean ± population std over seeds {{{}}}\n\n| Dataset |",
        seeds.join(", ")
    );
    for m in &cfg.bench.methods {
        out.push_str(&format!(" {m} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(cfg.bench.methods.len()));
    out.push('\n');
    for entry in &cfg.data {
        let stats: Vec<Option<(f64, f64)>> = cfg
            .bench
            .methods
            .iter()
            .map(|m| {
                rows.iter()
                    .find(|r| r.dataset == entry.name && r.method == m.name())
                    .map(|r| (r.mean_auc, r.std_auc))
            })
            .collect();
        let best = stats
            .iter()
            .flatten()
            .map(|s| (s.0 * 10000.0).round())
            .fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!("| {} |", entry.name));
        for s in &stats {
            match s {
                Some((mean, std)) => {
                    let text = format!("{:.2} ± {:.2}", mean * 100.0, std * 100.0);
                    if (mean * 10000.0).round() == best {
                        out.push_str(&format!(" **{text}** |"));
                    } else {
                        out.push_str(&format!(" {text} |"));
                    }
                }
                None => out.push_str(" error |"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (f, t) in points {
        s.push_str(&format!("{f},{t}\n"));
    }
    s
}

pub fn failed(cells: &[Cell]) -> usize {
    cells.iter().filter(|c| c.outcome.is_err()).count()
}

pub fn partial_failure(cells: &[Cell]) -> AppResult<()> {
    match failed(cells) {
        0 => Ok(()),
        n => Err(AppError::PartialBench { failed: n, total: cells.len() }),
    }
}
