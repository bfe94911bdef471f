//! A small diffusion transformer for vector data.
//!
//! The input vector is cut into contiguous segments of `patch` values; each
//! segment becomes a token. Tokens are projected to `width`, receive an
//! additive projection of the time embedding (and optionally a fixed
//! sinusoidal position code), pass through pre-norm transformer blocks and
//! are projected back to segment values.
//!
//! Parameter order:
//!
//! ```text
//! w_embed [p×w], b_embed [w], w_time [e×w], b_time [w],
//! per block: ln1_gain [w], ln1_bias [w], wq, wk, wv, wo [w×w],
//!            ln2_gain [w], ln2_bias [w], w_ff1 [w×f], b_ff1 [f], w_ff2 [f×w], b_ff2 [w]
//! lnf_gain [w], lnf_bias [w], w_out [w×p], b_out [p]
//! ```

use alloc::vec;
use alloc::vec::Vec;

use super::{check_params, init_uniform, time_embedding, time_embedding_batch, Denoiser};
use crate::numcore::{RngStream, Tape, Tensor, Var};
use crate::{Error, Result};

const LN_EPS: f64 = 1e-5;
const HEAD_PARAMS: usize = 4;
const BLOCK_PARAMS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DitConfig {
    pub data_dim: usize,
    pub patch: usize,
    pub width: usize,
    pub blocks: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub emb_dim: usize,
    pub pos_embedding: bool,
}

impl DitConfig {
    /// Defaults: one block, one head, width 32, patch 2 (1 for odd `data_dim`).
    pub fn new(data_dim: usize) -> Self {
        DitConfig {
            data_dim,
            patch: if data_dim % 2 == 0 { 2 } else { 1 },
            width: 32,
            blocks: 1,
            heads: 1,
            ff_width: 64,
            emb_dim: 32,
            pos_embedding: true,
        }
    }

    pub fn tokens(&self) -> usize {
        self.data_dim / self.patch
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let (p, w, f, e) = (self.patch, self.width, self.ff_width, self.emb_dim);
        let mut s = vec![vec![p, w], vec![w], vec![e, w], vec![w]];
        for _ in 0..self.blocks {
            s.extend([
                vec![w],
                vec![w],
                vec![w, w],
                vec![w, w],
                vec![w, w],
                vec![w, w],
                vec![w],
                vec![w],
                vec![w, f],
                vec![f],
                vec![f, w],
                vec![w],
            ]);
        }
        s.extend([vec![w], vec![w], vec![w, p], vec![p]]);
        s
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(alloc::format!("DiT: {m}")));
        if self.data_dim == 0 || self.patch == 0 || self.width == 0 || self.ff_width == 0 {
            return bad("dimensions must be positive");
        }
        if self.data_dim % self.patch != 0 {
            return bad("data dimension must be divisible by the patch size");
        }
        if self.heads == 0 || self.width % self.heads != 0 {
            return bad("width must be divisible by the head count");
        }
        if self.emb_dim == 0 || self.emb_dim % 2 != 0 {
            return bad("time embedding dimension must be even");
        }
        if self.pos_embedding && self.width % 2 != 0 {
            return bad("position embedding needs an even width");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DitDenoiser {
    config: DitConfig,
    params: Vec<Tensor>,
}

/// Multi-head scaled dot-product self-attention.
///
/// `q`, `k`, `v` are `[batch·tokens × width]` with tokens of one sample in
/// consecutive rows. Returns the merged head outputs in the same layout.
pub fn self_attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    batch: usize,
    tokens: usize,
    heads: usize,
) -> Result<Var> {
    let width = tape.value(q).cols();
    if width % heads != 0 || tape.value(q).rows() != batch * tokens {
        return Err(Error::shape("self_attention", tape.value(q).shape(), &[batch, tokens, heads]));
    }
    let dh = width / heads;
    let bh = batch * heads;
    let src = |b: usize, i: usize, h: usize, j: usize| (b * tokens + i) * width + h * dh + j;

    let mut split = Vec::with_capacity(batch * tokens * width);
    let mut split_t = Vec::with_capacity(batch * tokens * width);
    for b in 0..batch {
        for h in 0..heads {
            for i in 0..tokens {
                for j in 0..dh {
                    split.push(src(b, i, h, j));
                }
            }
            for j in 0..dh {
                for i in 0..tokens {
                    split_t.push(src(b, i, h, j));
                }
            }
        }
    }
    let qh = tape.gather(q, split.clone(), &[bh, tokens, dh])?;
    let kt = tape.gather(k, split_t, &[bh, dh, tokens])?;
    let vh = tape.gather(v, split, &[bh, tokens, dh])?;

    let scores = tape.batch_matmul(qh, kt)?;
    let scores = tape.scale(scores, 1.0 / libm::sqrt(dh as f64));
    let flat = tape.reshape(scores, &[bh * tokens, tokens])?;
    let attn = tape.softmax(flat);
    let attn = tape.reshape(attn, &[bh, tokens, tokens])?;
    let out = tape.batch_matmul(attn, vh)?;

    let mut merge = Vec::with_capacity(batch * tokens * width);
    for b in 0..batch {
        for i in 0..tokens {
            for h in 0..heads {
                for j in 0..dh {
                    merge.push(((b * heads + h) * tokens + i) * dh + j);
                }
            }
        }
    }
    tape.gather(out, merge, &[batch * tokens, width])
}

impl DitDenoiser {
    pub fn new(config: DitConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let mut params = init_uniform(&config.param_shapes(), rng);
        // Layer-norm gains start at one.
        let w = config.width;
        for (idx, p) in params.iter_mut().enumerate() {
            if Self::is_ln_gain(&config, idx) {
                *p = Tensor::ones(&[w]);
            } else if Self::is_ln_bias(&config, idx) {
                *p = Tensor::zeros(&[w]);
            }
        }
        Ok(DitDenoiser { config, params })
    }

    pub fn from_parts(config: DitConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        check_params(&config.param_shapes(), &params)?;
        Ok(DitDenoiser { config, params })
    }

    pub fn config(&self) -> &DitConfig {
        &self.config
    }

    fn is_ln_gain(config: &DitConfig, idx: usize) -> bool {
        let fin = HEAD_PARAMS + BLOCK_PARAMS * config.blocks;
        if idx == fin {
            return true;
        }
        idx >= HEAD_PARAMS && idx < fin && matches!((idx - HEAD_PARAMS) % BLOCK_PARAMS, 0 | 6)
    }

    fn is_ln_bias(config: &DitConfig, idx: usize) -> bool {
        let fin = HEAD_PARAMS + BLOCK_PARAMS * config.blocks;
        if idx == fin + 1 {
            return true;
        }
        idx >= HEAD_PARAMS && idx < fin && matches!((idx - HEAD_PARAMS) % BLOCK_PARAMS, 1 | 7)
    }

    /// One pre-norm transformer block over `[batch·tokens × width]` rows.
    pub fn block_forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        block: usize,
        h: Var,
        batch: usize,
        tokens: usize,
    ) -> Result<Var> {
        let p = &params[HEAD_PARAMS + block * BLOCK_PARAMS..HEAD_PARAMS + (block + 1) * BLOCK_PARAMS];
        let a = tape.layer_norm(h, p[0], p[1], LN_EPS)?;
        let q = tape.matmul(a, p[2])?;
        let k = tape.matmul(a, p[3])?;
        let v = tape.matmul(a, p[4])?;
        let att = self_attention(tape, q, k, v, batch, tokens, self.config.heads)?;
        let proj = tape.matmul(att, p[5])?;
        let h = tape.add(h, proj)?;

        let a = tape.layer_norm(h, p[6], p[7], LN_EPS)?;
        let f = tape.matmul(a, p[8])?;
        let f = tape.add(f, p[9])?;
        let f = tape.gelu(f);
        let f = tape.matmul(f, p[10])?;
        let f = tape.add(f, p[11])?;
        tape.add(h, f)
    }
}

impl Denoiser for DitDenoiser {
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
        let c = &self.config;
        let xs = tape.value(x).shape().to_vec();
        if xs.len() != 2 || xs[1] != c.data_dim || xs[0] != t.len() {
            return Err(Error::shape("dit forward", &xs, &[t.len(), c.data_dim]));
        }
        if params.len() != self.params.len() {
            return Err(Error::shape("dit params", &[params.len()], &[self.params.len()]));
        }
        let batch = xs[0];
        let n = c.tokens();
        let w = c.width;

        let tok = tape.reshape(x, &[batch * n, c.patch])?;
        let h = tape.matmul(tok, params[0])?;
        let mut h = tape.add(h, params[1])?;

        let emb = tape.constant(time_embedding_batch(t, c.emb_dim)?);
        let te = tape.matmul(emb, params[2])?;
        let te = tape.add(te, params[3])?;
        let repeat: Vec<usize> = (0..batch)
            .flat_map(|b| (0..n).flat_map(move |_| (0..w).map(move |j| b * w + j)))
            .collect();
        let te = tape.gather(te, repeat, &[batch * n, w])?;
        h = tape.add(h, te)?;

        if c.pos_embedding {
            let mut pos = Vec::with_capacity(batch * n * w);
            let codes: Vec<Vec<f64>> = (0..n).map(|i| time_embedding(i, w)).collect::<Result<_>>()?;
            for _ in 0..batch {
                for code in &codes {
                    pos.extend_from_slice(code);
                }
            }
            let pos = tape.constant(Tensor::new(vec![batch * n, w], pos)?);
            h = tape.add(h, pos)?;
        }

        for b in 0..c.blocks {
            h = self.block_forward(tape, params, b, h, batch, n)?;
        }

        let fin = HEAD_PARAMS + BLOCK_PARAMS * c.blocks;
        let h = tape.layer_norm(h, params[fin], params[fin + 1], LN_EPS)?;
        let out = tape.matmul(h, params[fin + 2])?;
        let out = tape.add(out, params[fin + 3])?;
        tape.reshape(out, &[batch, c.data_dim])
    }
}
