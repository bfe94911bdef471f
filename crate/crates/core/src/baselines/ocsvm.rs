use alloc::vec::Vec;

use crate::numcore::{RngStream, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcsvmConfig {
    pub nu: f64,
    /// RBF width; `None` means `1/d`.
    pub gamma: Option<f64>,
    /// Number of random Fourier features `D`.
    pub features: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for OcsvmConfig {
    fn default() -> Self {
        OcsvmConfig {
            nu: 0.1,
            gamma: None,
            features: 256,
            epochs: 500,
            seed: 0,
        }
    }
}

/// One-class SVM in the primal over random Fourier features approximating
/// the kernel `exp(−γ‖x − y‖²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    /// Frequencies `Ω`, `D × d`.
    pub omega: Tensor,
    /// Phases `b`, length `D`.
    pub phase: Vec<f64>,
    pub w: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub gamma: f64,
}

fn feature_map(omega: &Tensor, phase: &[f64], x: &Tensor) -> Result<Tensor> {
    let d = omega.cols();
    if x.ndim() != 2 || x.cols() != d {
        return Err(Error::shape("ocsvm features", x.shape(), &[d]));
    }
    let scale = libm::sqrt(2.0 / phase.len() as f64);
    let mut z = x.matmul(&omega.transpose()?)?;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(phase) {
            *v = scale * libm::cos(*v + b);
        }
    }
    Ok(z)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer over `ρ` of `−ρ + (1/(νn))·Σ max(0, ρ − s_i)`: the
/// `⌈νn⌉`-th smallest margin.
fn optimal_rho(margins: &[f64], nu: f64) -> f64 {
    let mut s = margins.to_vec();
    s.sort_by(f64::total_cmp);
    let k = libm::ceil(nu * s.len() as f64) as usize;
    s[k.clamp(1, s.len()) - 1]
}

/// Fits `(w, ρ)` by subgradient descent on
/// `½‖w‖² − ρ + (1/(νn))·Σ max(0, ρ − w·φ(x_i))`.
///
/// Each epoch takes a full-batch step on `w` with step size `1/k` (the
/// objective is 1-strongly convex in `w`), with `ρ` held at its exact
/// minimizer given `w`; the final `ρ` is recomputed for the final `w`.
pub fn ocsvm_fit(data: &Tensor, config: &OcsvmConfig) -> Result<OcsvmModel> {
    if data.ndim() != 2 || data.rows() < 1 {
        return Err(Error::Fit("one-class SVM needs at least 1 row".into()));
    }
    if !data.is_finite() {
        return Err(Error::Fit("training data holds NaN or infinity".into()));
    }
    let (n, d) = (data.rows(), data.cols());
    let gamma = config.gamma.unwrap_or(1.0 / d as f64);
    if !(config.nu > 0.0 && config.nu <= 1.0) {
        return Err(Error::Config(alloc::format!("nu = {} outside (0, 1]", config.nu)));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(alloc::format!("gamma = {gamma} must be positive")));
    }
    if config.features == 0 || config.epochs == 0 {
        return Err(Error::Config("need features >= 1 and epochs >= 1".into()));
    }
    let big_d = config.features;
    let mut rng = RngStream::new(config.seed);
    let sd = libm::sqrt(2.0 * gamma);
    let omega = rng.gaussian_tensor(&[big_d, d]).scale(sd);
    let phase: Vec<f64> = (0..big_d)
        .map(|_| rng.uniform() * 2.0 * core::f64::consts::PI)
        .collect();
    let phi = feature_map(&omega, &phase, data)?;

    // Hinge subgradient with ties broken by index: the ⌈νn⌉ lowest margins
    // carry weight 1/(νn) each, the last one the remainder, so the weights
    // sum to 1 and match the optimality condition for ρ.
    let quota = config.nu * n as f64;
    let mut w = alloc::vec![0.0; big_d];
    let mut margins = alloc::vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 1..=config.epochs {
        for (r, m) in margins.iter_mut().enumerate() {
            *m = dot(&w, phi.row(r));
        }
        order.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
        let mut pull = alloc::vec![0.0; big_d];
        let mut left = quota;
        for &r in &order {
            if left <= 0.0 {
                break;
            }
            let weight = left.min(1.0) / quota;
            left -= 1.0;
            for (p, v) in pull.iter_mut().zip(phi.row(r)) {
                *p += weight * v;
            }
        }
        let eta = 1.0 / k as f64;
        for (wi, p) in w.iter_mut().zip(&pull) {
            *wi -= eta * (*wi - p);
        }
    }
    for (r, m) in margins.iter_mut().enumerate() {
        *m = dot(&w, phi.row(r));
    }
    let rho = optimal_rho(&margins, config.nu);
    if !rho.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("one-class SVM weights became non-finite".into()));
    }
    Ok(OcsvmModel {
        omega,
        phase,
        w,
        rho,
        nu: config.nu,
        gamma,
    })
}

impl OcsvmModel {
    pub fn dim(&self) -> usize {
        self.omega.cols()
    }

    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        feature_map(&self.omega, &self.phase, x)
    }

    /// `w·φ(x)` per row.
    pub fn decision(&self, x: &Tensor) -> Result<Vec<f64>> {
        let phi = self.features(x)?;
        Ok((0..phi.rows()).map(|r| dot(&self.w, phi.row(r))).collect())
    }

    /// `ρ − w·φ(x)`; higher = more anomalous.
    pub fn score(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.decision(x)?.into_iter().map(|s| self.rho - s).collect())
    }
}
