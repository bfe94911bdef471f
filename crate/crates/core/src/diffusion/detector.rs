use alloc::vec::Vec;

use super::{denoise_from, predict_x0, q_sample, sample, train_ddpm, NoiseSchedule, TrainConfig};
use crate::denoisers::{Backbone, Denoiser};
use crate::numcore::{RngStream, Tensor};
use crate::{Error, Result};

/// Rows scored with one RNG substream. Fixed so scores do not depend on how
/// callers distribute groups across threads.
pub const SCORE_GROUP_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    /// Single-shot estimate `x̂0 = (x_t − √(1−ᾱ)·ε̂)/√ᾱ`.
    OneShot,
    /// Ancestral sampling from `t*` down to 1.
    MultiStep,
}

impl ScoringMode {
    pub fn id(self) -> u8 {
        match self {
            ScoringMode::OneShot => 0,
            ScoringMode::MultiStep => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(ScoringMode::OneShot),
            1 => Some(ScoringMode::MultiStep),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoringConfig {
    /// Partial-noising timestep `t*`.
    pub t_star: usize,
    /// Independent noisings averaged per score.
    pub repeats: usize,
    pub mode: ScoringMode,
}

impl ScoringConfig {
    /// `t* = T/10` (at least 1), four repeats, multi-step reconstruction.
    pub fn default_for(steps: usize) -> Self {
        ScoringConfig {
            t_star: (steps / 10).max(1),
            repeats: 4,
            mode: ScoringMode::MultiStep,
        }
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        if self.t_star == 0 || self.t_star > steps {
            return Err(Error::Config(alloc::format!(
                "t* = {} outside 1..={steps}",
                self.t_star
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("scoring repeats must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-feature z-score parameters computed on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics per column; constant columns get unit scale.
    pub fn fit(data: &Tensor) -> Self {
        let (n, d) = (data.rows(), data.cols());
        let mut mean = alloc::vec![0.0; d];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(data.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = alloc::vec![0.0; d];
        for r in 0..n {
            for ((s, v), m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .map(|s| {
                let sd = libm::sqrt(s / n as f64);
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: alloc::vec![0.0; d],
            std: alloc::vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &Tensor) -> Tensor {
        let d = self.dim();
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v = (*v - self.mean[i % d]) / self.std[i % d];
        }
        out
    }

    pub fn inverse(&self, z: &Tensor) -> Tensor {
        let d = self.dim();
        let mut out = z.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v = *v * self.std[i % d] + self.mean[i % d];
        }
        out
    }
}

/// A trained denoiser plus everything needed to score new data.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionDetector {
    pub denoiser: Backbone,
    pub schedule: NoiseSchedule,
    pub scoring: ScoringConfig,
    pub standardizer: Standardizer,
}

/// Reconstructs `z` (already standardized) once: noise to `t*`, then denoise.
pub fn reconstruct_standardized<D: Denoiser + ?Sized>(
    model: &D,
    sched: &NoiseSchedule,
    scoring: &ScoringConfig,
    z: &Tensor,
    rng: &mut RngStream,
) -> Result<Tensor> {
    let t = scoring.t_star;
    let eps = rng.gaussian_tensor(z.shape());
    let x_t = q_sample(z, t, &eps, sched)?;
    match scoring.mode {
        ScoringMode::OneShot => {
            let eps_hat = model.predict(&x_t, &alloc::vec![t; z.rows()])?;
            predict_x0(&x_t, &eps_hat, t, sched)
        }
        ScoringMode::MultiStep => denoise_from(model, x_t, t, sched, rng),
    }
}

impl DiffusionDetector {
    pub fn new(
        denoiser: Backbone,
        schedule: NoiseSchedule,
        scoring: ScoringConfig,
        standardizer: Standardizer,
    ) -> Result<Self> {
        scoring.validate(schedule.steps())?;
        if standardizer.dim() != denoiser.data_dim() {
            return Err(Error::shape(
                "detector",
                &[standardizer.dim()],
                &[denoiser.data_dim()],
            ));
        }
        Ok(DiffusionDetector {
            denoiser,
            schedule,
            scoring,
            standardizer,
        })
    }

    /// Standardizes `data` with its own statistics and trains `denoiser` on it.
    /// Returns the detector and the per-epoch loss trace.
    pub fn fit(
        mut denoiser: Backbone,
        data: &Tensor,
        schedule: NoiseSchedule,
        scoring: ScoringConfig,
        train: &TrainConfig,
    ) -> Result<(Self, Vec<f64>)> {
        scoring.validate(schedule.steps())?;
        if data.ndim() != 2 || data.cols() != denoiser.data_dim() {
            return Err(Error::shape("fit", data.shape(), &[denoiser.data_dim()]));
        }
        let standardizer = Standardizer::fit(data);
        let z = standardizer.transform(data);
        let trace = train_ddpm(&mut denoiser, &z, &schedule, train)?;
        let det = DiffusionDetector::new(denoiser, schedule, scoring, standardizer)?;
        Ok((det, trace))
    }

    pub fn data_dim(&self) -> usize {
        self.denoiser.data_dim()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.ndim() != 2 || x.cols() != self.data_dim() {
            return Err(Error::shape("detector input", x.shape(), &[self.data_dim()]));
        }
        Ok(())
    }

    /// One reconstruction `x̂0` of every row of `x`, in the original feature
    /// scale.
    pub fn reconstruct(&self, x: &Tensor, rng: &mut RngStream) -> Result<Tensor> {
        self.check_input(x)?;
        let z = self.standardizer.transform(x);
        let zhat = reconstruct_standardized(&self.denoiser, &self.schedule, &self.scoring, &z, rng)?;
        Ok(self.standardizer.inverse(&zhat))
    }

    /// Scores for rows `group·G .. (group+1)·G` of `x`, `G` =
    /// [`SCORE_GROUP_ROWS`], using substream `group` of `master`.
    pub fn score_group(&self, x: &Tensor, master: u64, group: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let start = group * SCORE_GROUP_ROWS;
        let end = (start + SCORE_GROUP_ROWS).min(x.rows());
        if start >= end {
            return Err(Error::Contract(alloc::format!("score group {group} is empty")));
        }
        let rows: Vec<usize> = (start..end).collect();
        let z = self.standardizer.transform(&x.select_rows(&rows));
        let mut rng = RngStream::substream(master, group as u64);
        let mut acc = alloc::vec![0.0; rows.len()];
        for _ in 0..self.scoring.repeats {
            let zhat = reconstruct_standardized(&self.denoiser, &self.schedule, &self.scoring, &z, &mut rng)?;
            for (r, a) in acc.iter_mut().enumerate() {
                *a += z.row(r).iter().zip(zhat.row(r)).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
            }
        }
        let k = self.scoring.repeats as f64;
        Ok(acc.into_iter().map(|a| a / k).collect())
    }

    pub fn score_groups(&self, rows: usize) -> usize {
        rows.div_ceil(SCORE_GROUP_ROWS)
    }

    /// Reconstruction-error anomaly scores (higher = more anomalous).
    ///
    /// `score(x) = (1/K)·Σ_k ‖z − ẑ^(k)‖²` in standardized feature space.
    /// Draws one master seed from `rng`; row groups then use independent
    /// substreams.
    pub fn anomaly_score(&self, x: &Tensor, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let master = rng.next_u64();
        let mut out = Vec::with_capacity(x.rows());
        for g in 0..self.score_groups(x.rows()) {
            out.extend(self.score_group(x, master, g)?);
        }
        Ok(out)
    }

    /// Draws `n` samples in the original feature scale.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Tensor> {
        let z = sample(&self.denoiser, &self.schedule, n, rng)?;
        Ok(self.standardizer.inverse(&z))
    }
}
