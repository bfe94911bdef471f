//! Noise-prediction networks `ε_θ(x_t, t)` and their optimizer.

mod adam;
mod dit;
mod embedding;
mod mlp;

use alloc::vec::Vec;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dit::{self_attention, DitConfig, DitDenoiser};
pub use embedding::{time_embedding, time_embedding_batch};
pub use mlp::{Activation, MlpConfig, MlpDenoiser};

use crate::numcore::{RngStream, Tape, Tensor, Var};
use crate::{Error, Result};

/// A trainable noise predictor.
pub trait Denoiser {
    fn data_dim(&self) -> usize;

    /// Parameters in their documented order.
    fn params(&self) -> &[Tensor];

    fn params_mut(&mut self) -> &mut [Tensor];

    /// Records `ε̂ = ε_θ(x, t)` on `tape`. `params` are tape handles for
    /// [`Denoiser::params`], in the same order; `x` is `[batch × d]` and `t`
    /// holds one timestep per row.
    fn forward_on(&self, tape: &mut Tape, params: &[Var], x: Var, t: &[usize]) -> Result<Var>;

    /// Inference-only forward pass.
    fn predict(&self, x: &Tensor, t: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params().iter().map(|p| tape.constant(p.clone())).collect();
        let xv = tape.constant(x.clone());
        let out = self.forward_on(&mut tape, &params, xv, t)?;
        Ok(tape.value(out).clone())
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(Tensor::len).sum()
    }
}

/// Either supported backbone, so detectors can own one without generics.
#[derive(Debug, Clone, PartialEq)]
pub enum Backbone {
    Mlp(MlpDenoiser),
    Dit(DitDenoiser),
}

impl Backbone {
    pub fn kind(&self) -> &'static str {
        match self {
            Backbone::Mlp(_) => "mlp",
            Backbone::Dit(_) => "dit",
        }
    }
}

impl From<MlpDenoiser> for Backbone {
    fn from(m: MlpDenoiser) -> Self {
        Backbone::Mlp(m)
    }
}

impl From<DitDenoiser> for Backbone {
    fn from(m: DitDenoiser) -> Self {
        Backbone::Dit(m)
    }
}

impl Denoiser for Backbone {
    fn data_dim(&self) -> usize {
        match self {
            Backbone::Mlp(m) => m.data_dim(),
            Backbone::Dit(m) => m.data_dim(),
        }
    }

    fn params(&self) -> &[Tensor] {
        match self {
            Backbone::Mlp(m) => m.params(),
            Backbone::Dit(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut [Tensor] {
        match self {
            Backbone::Mlp(m) => m.params_mut(),
            Backbone::Dit(m) => m.params_mut(),
        }
    }

    fn forward_on(&self, tape: &mut Tape, params: &[Var], x: Var, t: &[usize]) -> Result<Var> {
        match self {
            Backbone::Mlp(m) => m.forward_on(tape, params, x, t),
            Backbone::Dit(m) => m.forward_on(tape, params, x, t),
        }
    }
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` initialization. A vector takes the
/// fan-in of the matrix preceding it.
fn init_uniform(shapes: &[Vec<usize>], rng: &mut RngStream) -> Vec<Tensor> {
    let mut fan_in = 1;
    shapes
        .iter()
        .map(|s| {
            if s.len() == 2 {
                fan_in = s[0];
            }
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let n = s.iter().product();
            let data = (0..n).map(|_| rng.uniform_range(-bound, bound)).collect();
            Tensor::new(s.clone(), data).expect("positive shapes")
        })
        .collect()
}

fn check_params(shapes: &[Vec<usize>], params: &[Tensor]) -> Result<()> {
    if shapes.len() != params.len() {
        return Err(Error::shape("parameter count", &[shapes.len()], &[params.len()]));
    }
    for (s, p) in shapes.iter().zip(params) {
        if s.as_slice() != p.shape() {
            return Err(Error::shape("parameter", s, p.shape()));
        }
        if !p.is_finite() {
            return Err(Error::Numeric("parameter holds NaN or infinity".into()));
        }
    }
    Ok(())
}
