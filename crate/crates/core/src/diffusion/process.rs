use alloc::vec;
use alloc::vec::Vec;

use super::NoiseSchedule;
use crate::denoisers::Denoiser;
use crate::numcore::{RngStream, Tensor};
use crate::{Error, Result};

/// Closed-form forward noising `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`.
pub fn q_sample(x0: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check_t(t)?;
    if x0.shape() != eps.shape() {
        return Err(Error::shape("q_sample", x0.shape(), eps.shape()));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (libm::sqrt(ab), libm::sqrt(1.0 - ab));
    let data = x0.data().iter().zip(eps.data()).map(|(x, e)| a * x + b * e).collect();
    Tensor::new(x0.shape().to_vec(), data)
}

/// Inverts [`q_sample`] for a given noise estimate:
/// `x̂0 = (x_t − √(1−ᾱ_t)·ε̂) / √ᾱ_t`.
pub fn predict_x0(x_t: &Tensor, eps_hat: &Tensor, t: usize, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check_t(t)?;
    if x_t.shape() != eps_hat.shape() {
        return Err(Error::shape("predict_x0", x_t.shape(), eps_hat.shape()));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (libm::sqrt(ab), libm::sqrt(1.0 - ab));
    let data = x_t.data().iter().zip(eps_hat.data()).map(|(x, e)| (x - b * e) / a).collect();
    Tensor::new(x_t.shape().to_vec(), data)
}

/// Mean and variance of the forward posterior `q(x_{t−1} | x_t, x0)`.
pub fn posterior_params(x0: &Tensor, x_t: &Tensor, t: usize, sched: &NoiseSchedule) -> Result<(Tensor, f64)> {
    sched.check_t(t)?;
    if x0.shape() != x_t.shape() {
        return Err(Error::shape("posterior_params", x0.shape(), x_t.shape()));
    }
    let (ab, ab_prev) = (sched.alpha_bar(t), sched.alpha_bar_prev(t));
    let beta = sched.beta(t);
    let c0 = libm::sqrt(ab_prev) * beta / (1.0 - ab);
    let ct = libm::sqrt(sched.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
    let data = x0.data().iter().zip(x_t.data()).map(|(a, b)| c0 * a + ct * b).collect();
    Ok((Tensor::new(x0.shape().to_vec(), data)?, sched.posterior_variance(t)))
}

/// Reverse-process mean `μ_θ = (x_t − β_t/√(1−ᾱ_t)·ε̂) / √α_t`.
pub fn model_mean(x_t: &Tensor, eps_hat: &Tensor, t: usize, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check_t(t)?;
    if x_t.shape() != eps_hat.shape() {
        return Err(Error::shape("model_mean", x_t.shape(), eps_hat.shape()));
    }
    let coef = sched.beta(t) / libm::sqrt(1.0 - sched.alpha_bar(t));
    let inv = 1.0 / libm::sqrt(sched.alpha(t));
    let data = x_t.data().iter().zip(eps_hat.data()).map(|(x, e)| inv * (x - coef * e)).collect();
    Tensor::new(x_t.shape().to_vec(), data)
}

fn predict_at<D: Denoiser + ?Sized>(model: &D, x: &Tensor, t: usize) -> Result<Tensor> {
    let ts = vec![t; x.rows()];
    model.predict(x, &ts)
}

/// One ancestral step `x_t → x_{t−1}` with the fixed variance `β̃_t`. The
/// final step (`t = 1`) returns the mean without injecting noise.
pub fn p_sample<D: Denoiser + ?Sized>(
    model: &D,
    x_t: &Tensor,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<Tensor> {
    sched.check_t(t)?;
    let eps_hat = predict_at(model, x_t, t)?;
    let mut mean = model_mean(x_t, &eps_hat, t, sched)?;
    if t > 1 {
        let sd = libm::sqrt(sched.posterior_variance(t));
        for v in mean.data_mut() {
            *v += sd * rng.gaussian();
        }
    }
    Ok(mean)
}

/// Runs `p_sample` from `t_start` down to 1.
pub fn denoise_from<D: Denoiser + ?Sized>(
    model: &D,
    x_t: Tensor,
    t_start: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<Tensor> {
    sched.check_t(t_start)?;
    let mut x = x_t;
    for t in (1..=t_start).rev() {
        x = p_sample(model, &x, t, sched, rng)?;
    }
    Ok(x)
}

/// Draws `n` samples: `x_T ∼ N(0, I)` followed by `T` reverse steps.
pub fn sample<D: Denoiser + ?Sized>(
    model: &D,
    sched: &NoiseSchedule,
    n: usize,
    rng: &mut RngStream,
) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Contract("sample count must be positive".into()));
    }
    let x_t = rng.gaussian_tensor(&[n, model.data_dim()]);
    denoise_from(model, x_t, sched.steps(), sched, rng)
}

/// Per-row variational-bound term at timestep `t`, in nats.
///
/// For `t ≥ 2` this is `KL(N(μ̃, β̃_t I) ‖ N(μ_θ, β̃_t I)) = ‖μ̃ − μ_θ‖² / (2β̃_t)`.
/// At `t = 1`, where `β̃_1 = 0`, it is the decoder negative log-likelihood
/// `−log N(x0; μ_θ, β_1 I)`.
pub fn vlb_term<D: Denoiser + ?Sized>(
    x0: &Tensor,
    x_t: &Tensor,
    t: usize,
    model: &D,
    sched: &NoiseSchedule,
) -> Result<Vec<f64>> {
    let eps_hat = predict_at(model, x_t, t)?;
    let mu_theta = model_mean(x_t, &eps_hat, t, sched)?;
    if t == 1 {
        return Ok(decoder_nll(x0, &mu_theta, sched.beta(1)));
    }
    let (mu_tilde, var) = posterior_params(x0, x_t, t, sched)?;
    Ok(kl_equal_variance(&mu_tilde, &mu_theta, var))
}

pub(crate) fn kl_equal_variance(mu_a: &Tensor, mu_b: &Tensor, var: f64) -> Vec<f64> {
    (0..mu_a.rows())
        .map(|r| {
            let sq: f64 = mu_a.row(r).iter().zip(mu_b.row(r)).map(|(a, b)| (a - b) * (a - b)).sum();
            sq / (2.0 * var)
        })
        .collect()
}

fn decoder_nll(x0: &Tensor, mean: &Tensor, var: f64) -> Vec<f64> {
    let log_norm = 0.5 * libm::log(2.0 * core::f64::consts::PI * var);
    (0..x0.rows())
        .map(|r| {
            x0.row(r)
                .iter()
                .zip(mean.row(r))
                .map(|(x, m)| (x - m) * (x - m) / (2.0 * var) + log_norm)
                .sum()
        })
        .collect()
}
