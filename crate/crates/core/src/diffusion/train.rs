use alloc::vec::Vec;

use super::{q_sample, NoiseSchedule};
use crate::denoisers::{AdamConfig, AdamState, Denoiser};
use crate::numcore::{RngStream, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch: 64,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// One optimizer step on the noise-matching loss
/// `mean((ε_θ(x_t, t) − ε)²)`, averaged over every element of the batch.
///
/// Returns the loss evaluated before the update.
pub fn train_step<D: Denoiser + ?Sized>(
    model: &mut D,
    adam: &mut AdamState,
    x0: &Tensor,
    ts: &[usize],
    eps: &Tensor,
    sched: &NoiseSchedule,
) -> Result<f64> {
    if ts.len() != x0.rows() {
        return Err(Error::shape("train_step", &[ts.len()], &[x0.rows()]));
    }
    let mut xt = Tensor::zeros(x0.shape());
    for (r, &t) in ts.iter().enumerate() {
        let row_x0 = Tensor::vector(x0.row(r).to_vec());
        let row_eps = Tensor::vector(eps.row(r).to_vec());
        let noised = q_sample(&row_x0, t, &row_eps, sched)?;
        xt.row_mut(r).copy_from_slice(noised.data());
    }
    let (loss, grads) = loss_and_grads(model, &xt, ts, eps)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(alloc::format!("training loss became {loss}")));
    }
    adam.step(model.params_mut(), &grads)?;
    Ok(loss)
}

/// Noise-matching loss and its gradient with respect to every parameter.
pub fn loss_and_grads<D: Denoiser + ?Sized>(
    model: &D,
    x_t: &Tensor,
    ts: &[usize],
    eps: &Tensor,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let params: Vec<Var> = model.params().iter().map(|p| tape.leaf(p.clone())).collect();
    let x = tape.constant(x_t.clone());
    let target = tape.constant(eps.clone());
    let pred = model.forward_on(&mut tape, &params, x, ts)?;
    let loss = tape.mse(pred, target)?;
    let mut grads = tape.backward(loss)?;
    let g = params
        .iter()
        .zip(model.params())
        .map(|(v, p)| grads.take(*v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok((tape.value(loss).data()[0], g))
}

/// Trains `model` on `data` (`n × d`) and returns the mean loss of each epoch.
///
/// Every epoch visits a fresh permutation of the rows in minibatches of
/// `batch` (the last one may be smaller); each row draws `t ∼ U{1..T}` and
/// `ε ∼ N(0, I)`.
pub fn train_ddpm<D: Denoiser + ?Sized>(
    model: &mut D,
    data: &Tensor,
    sched: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let n = data.rows();
    if data.ndim() != 2 || data.cols() != model.data_dim() {
        return Err(Error::shape("train_ddpm", data.shape(), &[n, model.data_dim()]));
    }
    if config.batch == 0 || config.batch > n {
        return Err(Error::Contract(alloc::format!(
            "need 1 <= batch <= n, got batch {} for n = {n}",
            config.batch
        )));
    }
    let mut rng = RngStream::new(config.seed);
    let mut adam = AdamState::new(config.adam, model.params());
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch) {
            let x0 = data.select_rows(chunk);
            let ts: Vec<usize> = chunk.iter().map(|_| 1 + rng.below(sched.steps())).collect();
            let eps = rng.gaussian_tensor(x0.shape());
            let loss = train_step(model, &mut adam, &x0, &ts, &eps, sched).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(alloc::format!("epoch {}: {m}", epoch + 1)),
                other => other,
            })?;
            total += loss * chunk.len() as f64;
        }
        trace.push(total / n as f64);
    }
    Ok(trace)
}
