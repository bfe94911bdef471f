use alloc::vec::Vec;

use crate::numcore::Tensor;
use crate::{Error, Result};

/// Sinusoidal embedding of an integer timestep.
///
/// `emb[2i] = sin(t·ω_i)`, `emb[2i+1] = cos(t·ω_i)` with
/// `ω_i = 10000^(-2i/dim)`.
pub fn time_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Contract(alloc::format!(
            "time embedding dimension must be even and positive, got {dim}"
        )));
    }
    let mut out = Vec::with_capacity(dim);
    let t = t as f64;
    for i in 0..dim / 2 {
        let omega = libm::pow(10000.0, -2.0 * i as f64 / dim as f64);
        out.push(libm::sin(t * omega));
        out.push(libm::cos(t * omega));
    }
    Ok(out)
}

/// Row-stacked embeddings, one row per timestep.
pub fn time_embedding_batch(ts: &[usize], dim: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(ts.len() * dim);
    for &t in ts {
        data.extend(time_embedding(t, dim)?);
    }
    Tensor::new(alloc::vec![ts.len(), dim], data)
}
