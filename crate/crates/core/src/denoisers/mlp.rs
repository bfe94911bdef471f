use alloc::vec;
use alloc::vec::Vec;

use super::{check_params, init_uniform, time_embedding_batch, Denoiser};
use crate::numcore::{RngStream, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    pub fn id(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Gelu => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Gelu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpConfig {
    pub data_dim: usize,
    pub hidden: Vec<usize>,
    pub emb_dim: usize,
    pub activation: Activation,
}

impl MlpConfig {
    pub fn new(data_dim: usize) -> Self {
        MlpConfig {
            data_dim,
            hidden: vec![128, 128],
            emb_dim: 32,
            activation: Activation::Gelu,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.data_dim + self.emb_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.data_dim);
        w
    }

    /// `(weight, bias)` shapes for every layer, in parameter order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let w = self.widths();
        w.windows(2)
            .flat_map(|p| [vec![p[0], p[1]], vec![p[1]]])
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("MLP widths must be positive".into()));
        }
        if self.emb_dim == 0 || self.emb_dim % 2 != 0 {
            return Err(Error::Config(alloc::format!(
                "time embedding dimension must be even, got {}",
                self.emb_dim
            )));
        }
        Ok(())
    }
}

/// Noise predictor `[x_t, emb(t)] → hidden… → ε̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDenoiser {
    config: MlpConfig,
    params: Vec<Tensor>,
}

impl MlpDenoiser {
    pub fn new(config: MlpConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let params = init_uniform(&config.param_shapes(), rng);
        Ok(MlpDenoiser { config, params })
    }

    /// Rebuilds a model from explicit parameters, e.g. after deserialization.
    pub fn from_parts(config: MlpConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        check_params(&config.param_shapes(), &params)?;
        Ok(MlpDenoiser { config, params })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }
}

impl Denoiser for MlpDenoiser {
    fn data_dim(&self) -> usize {
        self.config.data_dim
    }

    fn params(&self) -> &[Tensor] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    fn forward_on(&self, tape: &mut Tape, params: &[Var], x: Var, t: &[usize]) -> Result<Var> {
        let xs = tape.value(x).shape().to_vec();
        if xs.len() != 2 || xs[1] != self.config.data_dim || xs[0] != t.len() {
            return Err(Error::shape("mlp forward", &xs, &[t.len(), self.config.data_dim]));
        }
        if params.len() != self.params.len() {
            return Err(Error::shape("mlp params", &[params.len()], &[self.params.len()]));
        }
        let emb = tape.constant(time_embedding_batch(t, self.config.emb_dim)?);
        let mut h = tape.concat_cols(x, emb)?;
        let layers = params.len() / 2;
        for (l, wb) in params.chunks(2).enumerate() {
            let z = tape.matmul(h, wb[0])?;
            h = tape.add(z, wb[1])?;
            if l + 1 < layers {
                h = match self.config.activation {
                    Activation::Relu => tape.relu(h),
                    Activation::Gelu => tape.gelu(h),
                };
            }
        }
        Ok(h)
    }
}
