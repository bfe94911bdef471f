//! TOML run configuration. Every section is optional and every key has a
//! default; unknown sections or keys are rejected.
//!
//! ```toml
//! [bench]
//! methods = ["ddpm_mlp", "iforest", "ocsvm", "copod"]
//! seeds = [1, 2, 3]
//! master_seed = 0
//! train_fraction = 0.7
//! contamination = 0.0
//!
//! [[data]]
//! name = "ring"
//! source = "ring:n=2000,anomaly_frac=0.1"   # or "blobs:n=..,d=..,anomaly_frac=..", "file:path"
//!
//! [diffusion]
//! steps = 100
//! # beta_start, beta_end: linear schedule; default 1e-4 .. 0.02·1000/steps
//! # t_star: default steps/10
//! repeats = 4
//! mode = "multi-step"   # or "one-shot"
//!
//! [mlp]
//! hidden = [128, 128]
//! emb_dim = 32
//! activation = "gelu"   # or "relu"
//!
//! [dit]
//! # patch: default 2 when it divides d, else 1
//! width = 32
//! blocks = 1
//! heads = 1
//! ff_width = 64
//! emb_dim = 32
//! pos_embedding = true
//!
//! [train]
//! method = "ddpm_mlp"
//! epochs = 200
//! batch = 64
//! lr = 1e-3
//! seed = 0
//!
//! [iforest]
//! n_trees = 100
//! subsample = 256
//!
//! [ocsvm]
//! nu = 0.1
//! # gamma: default 1/d
//! features = 256
//! epochs = 500
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anodiff_core::baselines::{IForestConfig, OcsvmConfig};
use anodiff_core::denoisers::{Activation, AdamConfig, DitConfig, MlpConfig};
use anodiff_core::diffusion::{NoiseSchedule, ScoringConfig, ScoringMode, TrainConfig};
use serde::Deserialize;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DdpmMlp,
    DdpmDit,
    Iforest,
    Ocsvm,
    Copod,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::DdpmMlp,
        Method::DdpmDit,
        Method::Iforest,
        Method::Ocsvm,
        Method::Copod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DdpmMlp => "ddpm_mlp",
            Method::DdpmDit => "ddpm_dit",
            Method::Iforest => "iforest",
            Method::Ocsvm => "ocsvm",
            Method::Copod => "copod",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = AppError;

    fn from_str(s: &str) -> AppResult<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                AppError::Config(format!("unknown method {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    OneShot,
    MultiStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Relu,
    Gelu,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub train_fraction: f64,
    pub contamination: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            methods: Vec::new(),
            seeds: Vec::new(),
            master_seed: 0,
            train_fraction: 0.7,
            contamination: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEntry {
    pub name: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSection {
    pub steps: usize,
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub t_star: Option<usize>,
    pub repeats: usize,
    pub mode: ModeName,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        DiffusionSection {
            steps: 100,
            beta_start: None,
            beta_end: None,
            t_star: None,
            repeats: 4,
            mode: ModeName::MultiStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSection {
    pub hidden: Vec<usize>,
    pub emb_dim: usize,
    pub activation: ActivationName,
}

impl Default for MlpSection {
    fn default() -> Self {
        MlpSection {
            hidden: vec![128, 128],
            emb_dim: 32,
            activation: ActivationName::Gelu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DitSection {
    pub patch: Option<usize>,
    pub width: usize,
    pub blocks: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub emb_dim: usize,
    pub pos_embedding: bool,
}

impl Default for DitSection {
    fn default() -> Self {
        DitSection {
            patch: None,
            width: 32,
            blocks: 1,
            heads: 1,
            ff_width: 64,
            emb_dim: 32,
            pos_embedding: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub method: Method,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            method: Method::DdpmMlp,
            epochs: 200,
            batch: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IForestSection {
    pub n_trees: usize,
    pub subsample: usize,
}

impl Default for IForestSection {
    fn default() -> Self {
        IForestSection {
            n_trees: 100,
            subsample: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcsvmSection {
    pub nu: f64,
    pub gamma: Option<f64>,
    pub features: usize,
    pub epochs: usize,
}

impl Default for OcsvmSection {
    fn default() -> Self {
        OcsvmSection {
            nu: 0.1,
            gamma: None,
            features: 256,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub bench: BenchSection,
    pub data: Vec<DataEntry>,
    pub diffusion: DiffusionSection,
    pub mlp: MlpSection,
    pub dit: DitSection,
    pub train: TrainSection,
    pub iforest: IForestSection,
    pub ocsvm: OcsvmSection,
    /// Directory that relative `file:` sources resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Where a benchmark dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Ring { n: usize, anomaly_frac: f64 },
    Blobs { n: usize, d: usize, anomaly_frac: f64 },
    File(PathBuf),
}

fn parse_kv(spec: &str, allowed: &[&str]) -> AppResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("expected key=value, got {part:?}")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(AppError::Config(format!(
                "unknown data parameter {k:?}, expected one of {}",
                allowed.join(", ")
            )));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn get<T: FromStr>(kv: &[(String, String)], key: &str, default: Option<T>) -> AppResult<T> {
    match kv.iter().rev().find(|(k, _)| k == key) {
        Some((_, v)) => v
            .parse()
            .map_err(|_| AppError::Config(format!("bad value {v:?} for {key}"))),
        None => default.ok_or_else(|| AppError::Config(format!("missing data parameter {key}"))),
    }
}

impl DataSource {
    pub fn parse(source: &str, base_dir: &Path) -> AppResult<Self> {
        let (kind, rest) = source.split_once(':').unwrap_or((source, ""));
        match kind.trim() {
            "ring" => {
                let kv = parse_kv(rest, &["n", "anomaly_frac"])?;
                Ok(DataSource::Ring {
                    n: get(&kv, "n", Some(2000))?,
                    anomaly_frac: get(&kv, "anomaly_frac", Some(0.1))?,
                })
            }
            "blobs" => {
                let kv = parse_kv(rest, &["n", "d", "anomaly_frac"])?;
                Ok(DataSource::Blobs {
                    n: get(&kv, "n", Some(2000))?,
                    d: get(&kv, "d", Some(8))?,
                    anomaly_frac: get(&kv, "anomaly_frac", Some(0.1))?,
                })
            }
            "file" if !rest.is_empty() => Ok(DataSource::File(base_dir.join(rest.trim()))),
            _ => Err(AppError::Config(format!(
                "data source {source:?} must start with ring:, blobs: or file:"
            ))),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> AppResult<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut cfg = Config::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn check(&self) -> AppResult<()> {
        let d = &self.diffusion;
        if d.steps == 0 {
            return Err(AppError::Config("diffusion.steps must be >= 1".into()));
        }
        if d.beta_start.is_some() != d.beta_end.is_some() {
            return Err(AppError::Config("set both diffusion.beta_start and beta_end, or neither".into()));
        }
        if self.train.epochs == 0 || self.train.batch == 0 {
            return Err(AppError::Config("train.epochs and train.batch must be >= 1".into()));
        }
        if !(self.train.lr > 0.0) {
            return Err(AppError::Config("train.lr must be positive".into()));
        }
        for entry in &self.data {
            DataSource::parse(&entry.source, Path::new(""))?;
        }
        let mut names: Vec<&str> = self.data.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(AppError::Config(format!("dataset name {:?} appears twice", w[0])));
        }
        Ok(())
    }

    /// Extra requirements for `bench`: at least one dataset, method and seed.
    pub fn check_bench(&self) -> AppResult<()> {
        if self.data.is_empty() {
            return Err(AppError::Config("bench needs at least one [[data]] entry".into()));
        }
        if self.bench.methods.is_empty() {
            return Err(AppError::Config("bench.methods is empty".into()));
        }
        if self.bench.seeds.is_empty() {
            return Err(AppError::Config("bench.seeds is empty".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> AppResult<NoiseSchedule> {
        let d = &self.diffusion;
        Ok(match (d.beta_start, d.beta_end) {
            (Some(a), Some(b)) => NoiseSchedule::linear(d.steps, a, b)?,
            _ => NoiseSchedule::scaled_linear(d.steps)?,
        })
    }

    pub fn scoring(&self) -> ScoringConfig {
        let d = &self.diffusion;
        let mut s = ScoringConfig::default_for(d.steps);
        if let Some(t) = d.t_star {
            s.t_star = t;
        }
        s.repeats = d.repeats;
        s.mode = match d.mode {
            ModeName::OneShot => ScoringMode::OneShot,
            ModeName::MultiStep => ScoringMode::MultiStep,
        };
        s
    }

    pub fn mlp_config(&self, data_dim: usize) -> MlpConfig {
        MlpConfig {
            data_dim,
            hidden: self.mlp.hidden.clone(),
            emb_dim: self.mlp.emb_dim,
            activation: match self.mlp.activation {
                ActivationName::Relu => Activation::Relu,
                ActivationName::Gelu => Activation::Gelu,
            },
        }
    }

    pub fn dit_config(&self, data_dim: usize) -> DitConfig {
        let mut c = DitConfig::new(data_dim);
        let s = &self.dit;
        if let Some(p) = s.patch {
            c.patch = p;
        }
        c.width = s.width;
        c.blocks = s.blocks;
        c.heads = s.heads;
        c.ff_width = s.ff_width;
        c.emb_dim = s.emb_dim;
        c.pos_embedding = s.pos_embedding;
        c
    }

    /// Minibatches never exceed the number of training rows.
    pub fn train_config(&self, seed: u64, rows: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch: self.train.batch.min(rows.max(1)),
            seed,
            adam: AdamConfig {
                lr: self.train.lr,
                ..AdamConfig::default()
            },
        }
    }

    pub fn iforest_config(&self, seed: u64) -> IForestConfig {
        IForestConfig {
            n_trees: self.iforest.n_trees,
            subsample: self.iforest.subsample,
            seed,
        }
    }

    pub fn ocsvm_config(&self, seed: u64) -> OcsvmConfig {
        OcsvmConfig {
            nu: self.ocsvm.nu,
            gamma: self.ocsvm.gamma,
            features: self.ocsvm.features,
            epochs: self.ocsvm.epochs,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.diffusion.steps, 100);
        assert_eq!(c.scoring().t_star, 10);
        assert_eq!(c.train.method, Method::DdpmMlp);
        assert!(c.check_bench().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::parse("[train]\nepochz = 3\n").is_err());
        assert!(Config::parse("[nope]\n").is_err());
        assert!(Config::parse("[bench]\nmethods = [\"knn\"]\n").is_err());
        assert!(Config::parse("[[data]]\nname = \"a\"\nsource = \"ring:m=3\"\n").is_err());
    }

    #[test]
    fn full_config() {
        let c = Config::parse(
            r#"
[bench]
methods = ["ddpm_dit", "copod"]
seeds = [4, 5]
[[data]]
name = "r"
source = "ring:n=300"
[[data]]
name = "b"
source = "blobs:n=100,d=3,anomaly_frac=0.05"
[diffusion]
steps = 50
beta_start = 0.001
beta_end = 0.1
t_star = 7
mode = "one-shot"
[dit]
patch = 3
"#,
        )
        .unwrap();
        c.check_bench().unwrap();
        assert_eq!(c.scoring().t_star, 7);
        assert_eq!(c.scoring().mode, ScoringMode::OneShot);
        assert_eq!(c.dit_config(6).patch, 3);
        assert_eq!(c.schedule().unwrap().beta(50), 0.1);
        assert_eq!(
            DataSource::parse(&c.data[1].source, Path::new("")).unwrap(),
            DataSource::Blobs { n: 100, d: 3, anomaly_frac: 0.05 }
        );
        assert_eq!(
            DataSource::parse(&c.data[0].source, Path::new("")).unwrap(),
            DataSource::Ring { n: 300, anomaly_frac: 0.1 }
        );
    }

    #[test]
    fn duplicate_dataset_names() {
        let text = "[[data]]\nname = \"a\"\nsource = \"ring\"\n[[data]]\nname = \"a\"\nsource = \"ring\"\n";
        assert!(Config::parse(text).is_err());
    }
}
