//! Subcommand implementations, kept free of argument parsing so tests can
//! drive them directly.

use std::fs;
use std::io::Write;
use std::path::Path;

use anodiff_core::baselines::DetectorModel;
use anodiff_core::datasets::{gen_blobs, gen_ring};
use anodiff_core::numcore::RngStream;

use crate::bench::{self, fit_method, score_model};
use crate::config::Config;
use crate::dataset_io::{load_dataset, save_dataset};
use crate::error::{AppError, AppResult};
use crate::model_io::{load_model, save_model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Blobs,
    Ring,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> AppResult<()> {
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

pub fn gen_data(
    generator: Generator,
    n: usize,
    d: usize,
    anomaly_frac: f64,
    seed: u64,
    out: &Path,
) -> AppResult<()> {
    let ds = match generator {
        Generator::Blobs => gen_blobs(n, d, anomaly_frac, seed)?,
        Generator::Ring => gen_ring(n, anomaly_frac, seed)?,
    };
    save_dataset(out, &ds)
}

/// Fits `[train].method` on every row of the data file and writes the
/// model. Diffusion training prints `epoch,loss` lines to `log`.
pub fn train(config: &Path, data: &Path, model_out: &Path, log: &mut dyn Write) -> AppResult<()> {
    let cfg = Config::load(config)?;
    let ds = load_dataset(data)?;
    let (model, trace) = fit_method(cfg.train.method, &cfg, &ds.features, cfg.train.seed)?;
    if let Some(trace) = trace {
        let mut text = String::from("epoch,loss\n");
        for (i, l) in trace.iter().enumerate() {
            text.push_str(&format!("{},{l}\n", i + 1));
        }
        log.write_all(text.as_bytes())
            .map_err(|e| AppError::io(Path::new("<stdout>"), e))?;
    }
    save_model(model_out, &model)
}

/// Writes `row,score`, one line per input row in input order.
pub fn score(model: &Path, data: &Path, out: &Path, seed: Option<u64>) -> AppResult<()> {
    let mut m = load_model(model)?;
    if let Some(s) = seed {
        m.score_seed = s;
    }
    let ds = load_dataset(data)?;
    let scores = score_model(&m, &ds.features)?;
    let mut text = String::from("row,score\n");
    for (i, s) in scores.iter().enumerate() {
        text.push_str(&format!("{i},{s}\n"));
    }
    write_file(out, text)
}

pub fn sample(model: &Path, n: usize, seed: u64, out: &Path) -> AppResult<()> {
    let m = load_model(model)?;
    let DetectorModel::Diffusion(det) = &m.detector else {
        return Err(anodiff_core::Error::Contract(format!(
            "sampling needs a diffusion model, {} is {}",
            model.display(),
            m.detector.kind()
        ))
        .into());
    };
    let x = det.sample(n, &mut RngStream::new(seed))?;
    let ds = anodiff_core::datasets::Dataset::new(x, None, "samples")?;
    crate::dataset_io::save_csv(out, &ds)
}

/// Runs the benchmark and writes the CSV, the markdown table and, when
/// `roc_dir` is given, one `dataset_method_seed.csv` ROC file per cell.
/// Returns the partial-failure error after writing everything if any cell
/// failed.
pub fn bench(config: &Path, out_csv: &Path, out_md: &Path, roc_dir: Option<&Path>) -> AppResult<()> {
    let cfg = Config::load(config)?;
    let cells = bench::run_bench(&cfg)?;
    write_file(out_csv, bench::results_csv(&cells))?;
    write_file(out_md, bench::markdown_table(&cfg, &cells))?;
    if let Some(dir) = roc_dir {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        for c in &cells {
            if let Ok(r) = &c.outcome {
                let p = dir.join(format!("{}_{}_{}.csv", c.dataset, c.method, c.seed));
                write_file(&p, bench::roc_csv(&r.roc))?;
            }
        }
    }
    for c in &cells {
        if let Err(e) = &c.outcome {
            eprintln!("cell {}/{}/{} failed: {e}", c.dataset, c.method, c.seed);
        }
    }
    bench::partial_failure(&cells)
}
