//! Labeled datasets, synthetic generators and the one-class train/test
//! split.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::numcore::{RngStream, Tensor};
use crate::{Error, Result};

/// Where a synthetic dataset came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub generator: String,
    /// `key=value` pairs joined by commas, e.g. `n=2000,anomaly_frac=0.1`.
    pub params: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    /// 0 = normal, 1 = anomaly.
    pub labels: Option<Vec<u8>>,
    pub name: String,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Option<Vec<u8>>, name: impl Into<String>) -> Result<Self> {
        if features.ndim() != 2 {
            return Err(Error::shape("dataset", features.shape(), &[0, 0]));
        }
        if !features.is_finite() {
            return Err(Error::Contract("dataset features must be finite".into()));
        }
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::Contract(alloc::format!(
                    "{} labels for {} rows",
                    l.len(),
                    features.rows()
                )));
            }
            if l.iter().any(|&v| v > 1) {
                return Err(Error::Contract("labels must be 0 or 1".into()));
            }
        }
        Ok(Dataset {
            features,
            labels,
            name: name.into(),
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&v| v == 1).count())
    }

    /// Rows `indices` in the given order; name and provenance carry over.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            name: self.name.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

fn check_frac(anomaly_frac: f64) -> Result<()> {
    if !(anomaly_frac > 0.0 && anomaly_frac < 0.5) {
        return Err(Error::Config(alloc::format!(
            "anomaly_frac = {anomaly_frac} outside (0, 0.5)"
        )));
    }
    Ok(())
}

fn assemble(
    rows: Vec<f64>,
    labels: Vec<u8>,
    d: usize,
    rng: &mut RngStream,
    generator: &str,
    params: String,
    seed: u64,
) -> Result<Dataset> {
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut feats = Vec::with_capacity(n * d);
    for &i in &order {
        feats.extend_from_slice(&rows[i * d..(i + 1) * d]);
    }
    let labels = order.iter().map(|&i| labels[i]).collect();
    let mut ds = Dataset::new(Tensor::new(alloc::vec![n, d], feats)?, Some(labels), generator)?;
    ds.provenance = Some(Provenance {
        generator: generator.to_string(),
        params,
        seed,
    });
    Ok(ds)
}

/// Normals from `N(0, I_d)` plus `⌊n·anomaly_frac⌋` anomalies uniform in
/// `[−6, 6]^d` with `‖x‖ > 4`. Rows are shuffled.
pub fn gen_blobs(n: usize, d: usize, anomaly_frac: f64, seed: u64) -> Result<Dataset> {
    check_frac(anomaly_frac)?;
    if n == 0 || d == 0 {
        return Err(Error::Config("blobs need n >= 1 and d >= 1".into()));
    }
    let n_anom = libm::floor(n as f64 * anomaly_frac) as usize;
    let mut rng = RngStream::new(seed);
    let mut rows = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n - n_anom {
        rows.extend((0..d).map(|_| rng.gaussian()));
        labels.push(0);
    }
    let mut x = alloc::vec![0.0; d];
    for _ in 0..n_anom {
        loop {
            x.iter_mut().for_each(|v| *v = rng.uniform_range(-6.0, 6.0));
            if x.iter().map(|v| v * v).sum::<f64>() > 16.0 {
                break;
            }
        }
        rows.extend_from_slice(&x);
        labels.push(1);
    }
    let params = alloc::format!("n={n},d={d},anomaly_frac={anomaly_frac}");
    assemble(rows, labels, d, &mut rng, "blobs", params, seed)
}

/// Two-dimensional ring: normals at radius `U[0.8, 1.2]` with uniform
/// angle. Anomalies: the first half (rounded up) uniform in the disk of
/// radius 0.6, the rest uniform in `[−2, 2]²` outside the annulus
/// `0.7 ≤ r ≤ 1.3`. Rows are shuffled.
pub fn gen_ring(n: usize, anomaly_frac: f64, seed: u64) -> Result<Dataset> {
    check_frac(anomaly_frac)?;
    if n == 0 {
        return Err(Error::Config("ring needs n >= 1".into()));
    }
    let n_anom = libm::floor(n as f64 * anomaly_frac) as usize;
    let n_center = n_anom.div_ceil(2);
    let tau = 2.0 * core::f64::consts::PI;
    let mut rng = RngStream::new(seed);
    let mut rows = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n - n_anom {
        let r = rng.uniform_range(0.8, 1.2);
        let a = rng.uniform() * tau;
        rows.extend([r * libm::cos(a), r * libm::sin(a)]);
        labels.push(0);
    }
    for _ in 0..n_center {
        let r = 0.6 * libm::sqrt(rng.uniform());
        let a = rng.uniform() * tau;
        rows.extend([r * libm::cos(a), r * libm::sin(a)]);
        labels.push(1);
    }
    for _ in n_center..n_anom {
        loop {
            let (x, y) = (rng.uniform_range(-2.0, 2.0), rng.uniform_range(-2.0, 2.0));
            let r = libm::sqrt(x * x + y * y);
            if !(0.7..=1.3).contains(&r) {
                rows.extend([x, y]);
                break;
            }
        }
        labels.push(1);
    }
    let params = alloc::format!("n={n},anomaly_frac={anomaly_frac}");
    assemble(rows, labels, 2, &mut rng, "ring", params, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Fraction of normal rows used for training.
    pub train_fraction: f64,
    /// Fraction of anomalous rows admitted into training.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            contamination: 0.0,
            seed: 0,
        }
    }
}

/// Row indices `(train, test)`, each ascending. Training takes
/// `⌊train_fraction·n_normal⌋` random normals and
/// `⌊contamination·n_anomaly⌋` random anomalies; everything else is test.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::Split("split needs labels".into()))?;
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Split(alloc::format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    if !(0.0..=0.5).contains(&spec.contamination) {
        return Err(Error::Split(alloc::format!(
            "contamination {} outside [0, 0.5]",
            spec.contamination
        )));
    }
    let normals: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let anomalies: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let n_norm = libm::floor(spec.train_fraction * normals.len() as f64) as usize;
    let n_anom = libm::floor(spec.contamination * anomalies.len() as f64) as usize;
    if n_norm < 2 {
        return Err(Error::Split(alloc::format!(
            "only {n_norm} normal rows would be used for training, need at least 2"
        )));
    }
    if n_norm == normals.len() && n_anom == anomalies.len() {
        return Err(Error::Split("no rows left for testing".into()));
    }
    let mut rng = RngStream::new(spec.seed);
    let mut take = |pool: &[usize], k: usize| -> Vec<usize> {
        rng.sample_indices(pool.len(), k).into_iter().map(|i| pool[i]).collect()
    };
    let mut train = take(&normals, n_norm);
    train.extend(take(&anomalies, n_anom));
    train.sort_unstable();
    let mut in_train = alloc::vec![false; labels.len()];
    train.iter().for_each(|&i| in_train[i] = true);
    let test = (0..labels.len()).filter(|&i| !in_train[i]).collect();
    Ok((train, test))
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((ds.select(&train), ds.select(&test)))
}
