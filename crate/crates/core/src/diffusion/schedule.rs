use alloc::vec::Vec;

use crate::{Error, Result};

/// Variance schedule of the forward process and the quantities derived from
/// it. Timesteps are 1-based: `t ∈ 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    posterior_variances: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from explicit `β_1..β_T`, each in `(0, 1)`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Config("schedule needs at least one timestep".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Config(alloc::format!("beta {b} outside (0, 1)")));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let posterior_variances = (0..betas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
                (1.0 - prev) / (1.0 - alpha_bars[i]) * betas[i]
            })
            .collect();
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
            posterior_variances,
        })
    }

    /// `β_t` linearly spaced from `beta_start` to `beta_end`, both inclusive.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("schedule needs at least one timestep".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config(alloc::format!(
                "need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
            )));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    /// Linear schedule `[1e-4, 0.02·1000/T]`: the usual 1000-step range with
    /// its end point stretched so shorter chains still reach pure noise.
    /// The end is capped at 0.999.
    pub fn scaled_linear(steps: usize) -> Result<Self> {
        let end = (0.02 * 1000.0 / steps.max(1) as f64).min(0.999);
        Self::linear(steps, 1e-4_f64.min(end), end)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn posterior_variances(&self) -> &[f64] {
        &self.posterior_variances
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::Contract(alloc::format!(
                "timestep {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    /// `ᾱ_{t-1}` with `ᾱ_0 = 1`.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t <= 1 {
            1.0
        } else {
            self.alpha_bars[t - 2]
        }
    }

    /// `β̃_t = (1 − ᾱ_{t−1}) / (1 − ᾱ_t) · β_t`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.posterior_variances[t - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_products() {
        let s = NoiseSchedule::from_betas(alloc::vec![0.1, 0.2, 0.3]).unwrap();
        let expect_a = [0.9, 0.8, 0.7];
        let expect_ab = [0.9, 0.72, 0.504];
        for i in 0..3 {
            assert!((s.alphas()[i] - expect_a[i]).abs() < 1e-15);
            assert!((s.alpha_bars()[i] - expect_ab[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step() {
        let s = NoiseSchedule::linear(1, 0.05, 0.05).unwrap();
        assert_eq!(s.alpha_bar(1), 1.0 - 0.05);
        assert_eq!(s.posterior_variance(1), 0.0);
    }

    #[test]
    fn thousand_steps_reach_noise() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        assert!(s.alpha_bar(1000) < 1e-4, "{}", s.alpha_bar(1000));
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(1000) - 0.02).abs() < 1e-17);
    }

    #[test]
    fn bounds_rejected() {
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.3, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.1, 1.0).is_err());
        assert!(NoiseSchedule::from_betas(alloc::vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn posterior_variance_example() {
        let s = NoiseSchedule::from_betas(alloc::vec![0.1, 0.2]).unwrap();
        let expect = (1.0 - 0.9) / (1.0 - 0.72) * 0.2;
        assert!((s.posterior_variance(2) - expect).abs() < 1e-15);
        assert!((s.posterior_variance(2) - 0.071_428_6).abs() < 1e-7);
    }

    #[test]
    fn scaled_linear_end_points() {
        let s = NoiseSchedule::scaled_linear(100).unwrap();
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(100) - 0.2).abs() < 1e-15);
        assert!(NoiseSchedule::scaled_linear(1).is_ok());
        assert!(NoiseSchedule::scaled_linear(10).is_ok());
    }
}
