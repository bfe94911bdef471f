//! Dataset files: CSV with an `f0,…,f{d−1}[,label]` header and the `ADT1`
//! binary format.
//!
//! `ADT1` layout (little-endian): magic `ADT1`, `u8` version (1), `u8`
//! has_labels, `u8` ndim, `u64` per dimension, the `f64` payload, one `u8`
//! per row when labels are present, then a trailer of `u64` byte length
//! followed by UTF-8 `key=value` lines (`name`, and `generator`, `params`,
//! `seed` for synthetic data).

use std::fs;
use std::path::Path;

use anodiff_core::datasets::{Dataset, Provenance};
use anodiff_core::numcore::Tensor;

use crate::bytes::{Decoder, Encoder};
use crate::error::{AppError, AppResult};

const MAGIC: &[u8; 4] = b"ADT1";
const VERSION: u8 = 1;

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

pub fn load_csv(path: &Path) -> AppResult<Dataset> {
    let text = fs::read(path).map_err(|e| AppError::io(path, e))?;
    parse_csv(&text, path)
}

fn parse_csv(text: &[u8], path: &Path) -> AppResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| AppError::format(path, format!("line 1: {e}")))?,
        None => return Err(AppError::format(path, "empty file, expected a header")),
    };
    let mut names: Vec<&str> = header.iter().collect();
    let has_labels = names.last() == Some(&"label");
    if has_labels {
        names.pop();
    }
    if names.is_empty() {
        return Err(AppError::format(path, "line 1: header has no feature columns"));
    }
    for (i, n) in names.iter().enumerate() {
        if *n != format!("f{i}") {
            return Err(AppError::format(
                path,
                format!("line 1: unknown header column {n:?}, expected \"f{i}\""),
            ));
        }
    }
    let d = names.len();
    let width = d + has_labels as usize;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| AppError::format(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(AppError::format(
                path,
                format!("line {line}: {} fields, header has {width}", rec.len()),
            ));
        }
        for (j, cell) in rec.iter().take(d).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                AppError::format(path, format!("line {line}: column f{j}: {cell:?} is not a number"))
            })?;
            if !v.is_finite() {
                return Err(AppError::format(path, format!("line {line}: column f{j} is not finite")));
            }
            data.push(v);
        }
        if has_labels {
            let cell = &rec[d];
            match cell {
                "0" => labels.push(0),
                "1" => labels.push(1),
                _ => {
                    return Err(AppError::format(
                        path,
                        format!("line {line}: label {cell:?} must be 0 or 1"),
                    ))
                }
            }
        }
    }
    let n = data.len() / d;
    if n == 0 {
        return Err(AppError::format(path, "no data rows"));
    }
    let features = Tensor::new(vec![n, d], data)?;
    Ok(Dataset::new(features, has_labels.then_some(labels), stem(path))?)
}

/// Writes shortest round-trip decimal representations, so reloading
/// reproduces every value exactly.
pub fn save_csv(path: &Path, ds: &Dataset) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| AppError::format(path, e.to_string()))?;
    for r in 0..ds.len() {
        let mut row: Vec<String> = ds.features.row(r).iter().map(|v| v.to_string()).collect();
        if let Some(l) = &ds.labels {
            row.push(l[r].to_string());
        }
        w.write_record(&row).map_err(|e| AppError::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::format(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

pub fn encode_bin(ds: &Dataset) -> Vec<u8> {
    let mut e = Encoder::new(MAGIC);
    e.u8(VERSION);
    e.u8(ds.labels.is_some() as u8);
    e.u8(ds.features.ndim() as u8);
    for &d in ds.features.shape() {
        e.usize(d);
    }
    for &v in ds.features.data() {
        e.f64(v);
    }
    if let Some(l) = &ds.labels {
        e.buf.extend_from_slice(l);
    }
    let mut meta = format!("name={}\n", ds.name);
    if let Some(p) = &ds.provenance {
        meta.push_str(&format!(
            "generator={}\nparams={}\nseed={}\n",
            p.generator, p.params, p.seed
        ));
    }
    e.usize(meta.len());
    e.buf.extend_from_slice(meta.as_bytes());
    e.buf
}

pub fn decode_bin(bytes: &[u8]) -> Result<Dataset, String> {
    let mut d = Decoder::new(bytes);
    d.expect_magic(MAGIC)?;
    let version = d.u8()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let has_labels = match d.u8()? {
        0 => false,
        1 => true,
        v => return Err(format!("has_labels byte {v} is not 0 or 1")),
    };
    let ndim = d.u8()? as usize;
    if ndim != 2 {
        return Err(format!("expected 2 dimensions, found {ndim}"));
    }
    let shape = vec![d.usize()?, d.usize()?];
    let len = shape[0]
        .checked_mul(shape[1])
        .ok_or("dimensions overflow")?;
    let data = d.f64_n(len)?;
    let labels = if has_labels {
        Some(d.take(shape[0])?.to_vec())
    } else {
        None
    };
    let meta_len = d.usize()?;
    let meta = std::str::from_utf8(d.take(meta_len)?).map_err(|_| "metadata is not UTF-8")?;
    d.finish()?;
    let mut name = String::new();
    let (mut generator, mut params, mut seed) = (None, None, None);
    for line in meta.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| format!("metadata line {line:?}"))?;
        match k {
            "name" => name = v.to_string(),
            "generator" => generator = Some(v.to_string()),
            "params" => params = Some(v.to_string()),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| format!("bad seed {v:?}"))?),
            _ => return Err(format!("unknown metadata key {k:?}")),
        }
    }
    let features = Tensor::new(shape, data).map_err(|e| e.to_string())?;
    let mut ds = Dataset::new(features, labels, name).map_err(|e| e.to_string())?;
    ds.provenance = match (generator, params, seed) {
        (Some(generator), Some(params), Some(seed)) => Some(Provenance {
            generator,
            params,
            seed,
        }),
        (None, None, None) => None,
        _ => return Err("incomplete provenance metadata".into()),
    };
    Ok(ds)
}

pub fn load_bin(path: &Path) -> AppResult<Dataset> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_bin(&bytes).map_err(|m| AppError::format(path, m))
}

pub fn save_bin(path: &Path, ds: &Dataset) -> AppResult<()> {
    fs::write(path, encode_bin(ds)).map_err(|e| AppError::io(path, e))
}

fn extension(path: &Path) -> AppResult<&str> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e @ ("csv" | "bin")) => Ok(e),
        _ => Err(AppError::Usage(format!(
            "{}: dataset files must end in .csv or .bin",
            path.display()
        ))),
    }
}

/// Picks the format from the extension (`.csv` or `.bin`).
pub fn load_dataset(path: &Path) -> AppResult<Dataset> {
    match extension(path)? {
        "csv" => load_csv(path),
        _ => load_bin(path),
    }
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> AppResult<()> {
    match extension(path)? {
        "csv" => save_csv(path, ds),
        _ => save_bin(path, ds),
    }
}
