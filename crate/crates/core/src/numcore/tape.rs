//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! Every operation appends a node holding its forward value, so node ids are
//! a topological order by construction. [`Tape::backward`] walks the nodes
//! once, from the loss down to id 0.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{
    self, batch_matmul, broadcast_kind, gelu_grad, layer_norm_parts, matmul, Broadcast,
    ElementwiseOp, Tensor,
};
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    Binary(ElementwiseOp, Var, Var),
    Relu(Var),
    Gelu(Var),
    Scale(Var, f64),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Gather(Var, Vec<usize>),
    ConcatCols(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Single-threaded computation record.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn reduce_rows(g: &Tensor, cols: usize) -> Tensor {
    let mut out = vec![0.0; cols];
    for (i, v) in g.data().iter().enumerate() {
        out[i % cols] += v;
    }
    Tensor::vector(out)
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable input (a parameter or an input we want gradients for).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = matmul(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn batch_matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = batch_matmul(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::BatchMatMul(a, b), &[a, b]))
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, a: Var, b: Option<Var>) -> Result<Var> {
        let out = tensor::elementwise(op, self.value(a), b.map(|b| self.value(b)))?;
        Ok(match (op, b) {
            (ElementwiseOp::Relu, _) => self.push(out, Op::Relu(a), &[a]),
            (ElementwiseOp::Gelu, _) => self.push(out, Op::Gelu(a), &[a]),
            (_, Some(b)) => self.push(out, Op::Binary(op, a, b), &[a, b]),
            (_, None) => unreachable!("binary op validated above"),
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Add, a, Some(b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Sub, a, Some(b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Mul, a, Some(b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(tensor::relu);
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(tensor::gelu);
        self.push(out, Op::Gelu(a), &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).scale(c);
        self.push(out, Op::Scale(a, c), &[a])
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = tensor::softmax(self.value(a));
        self.push(out, Op::Softmax(a), &[a])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let out = tensor::layer_norm(self.value(x), self.value(gain), self.value(bias), eps)?;
        let (xhat, inv_std) = layer_norm_parts(self.value(x), eps);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).mean());
        self.push(out, Op::Mean(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    /// `out[i] = a[index[i]]` over the flat buffers, reshaped to `shape`.
    ///
    /// Covers permutations, transposes and row repetition; the backward pass
    /// scatter-adds.
    pub fn gather(&mut self, a: Var, index: Vec<usize>, shape: &[usize]) -> Result<Var> {
        let src = self.value(a).data();
        if index.iter().any(|&i| i >= src.len()) {
            return Err(Error::Contract("gather index out of bounds".into()));
        }
        let data = index.iter().map(|&i| src[i]).collect();
        let out = Tensor::new(shape.to_vec(), data)?;
        Ok(self.push(out, Op::Gather(a, index), &[a]))
    }

    /// Concatenates two matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.ndim() != 2 || tb.ndim() != 2 || ta.shape()[0] != tb.shape()[0] {
            return Err(Error::shape("concat_cols", ta.shape(), tb.shape()));
        }
        let rows = ta.shape()[0];
        let (ca, cb) = (ta.shape()[1], tb.shape()[1]);
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let out = Tensor::new(vec![rows, ca + cb], data)?;
        Ok(self.push(out, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Mean of squared differences over every element.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let diff = self.sub(pred, target)?;
        let sq = self.mul(diff, diff)?;
        Ok(self.mean(sq))
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::Contract(alloc::format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let wants = |v: Var| self.nodes[v.0].needs_grad;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        let bt = self.value(*b).transpose()?;
                        accumulate(&mut grads[a.0], matmul(&g, &bt)?);
                    }
                    if wants(*b) {
                        let at = self.value(*a).transpose()?;
                        accumulate(&mut grads[b.0], matmul(&at, &g)?);
                    }
                }
                Op::BatchMatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if wants(*a) {
                        accumulate(&mut grads[a.0], batch_matmul(&g, &transpose_last2(tb))?);
                    }
                    if wants(*b) {
                        accumulate(&mut grads[b.0], batch_matmul(&transpose_last2(ta), &g)?);
                    }
                }
                Op::Binary(op, a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let kind = broadcast_kind("backward", ta.shape(), tb.shape())?;
                    let (ga, gb) = match op {
                        ElementwiseOp::Add => (g.clone(), g),
                        ElementwiseOp::Sub => {
                            let neg = g.scale(-1.0);
                            (g, neg)
                        }
                        ElementwiseOp::Mul => {
                            let ga = tensor::elementwise(ElementwiseOp::Mul, &g, Some(tb))?;
                            (ga, g.mul(ta)?)
                        }
                        _ => unreachable!("unary ops are recorded separately"),
                    };
                    if wants(*a) {
                        accumulate(&mut grads[a.0], ga);
                    }
                    if wants(*b) {
                        let gb = match kind {
                            Broadcast::Same => gb,
                            Broadcast::Rows => reduce_rows(&gb, tb.len()),
                        };
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut ga = g;
                    for (gv, &xv) in ga.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let mut ga = g;
                    for (gv, &xv) in ga.data_mut().iter_mut().zip(x.data()) {
                        *gv *= gelu_grad(xv);
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], g.scale(*c)),
                Op::Softmax(a) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut ga = g;
                    for (grow, yrow) in ga.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                        for (gv, &yv) in grow.iter_mut().zip(yrow) {
                            *gv = yv * (*gv - dot);
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let d = self.value(*x).cols();
                    let gv = self.value(*gain).data();
                    if wants(*gain) {
                        let mut dg = vec![0.0; d];
                        for (i, (gi, xh)) in g.data().iter().zip(xhat).enumerate() {
                            dg[i % d] += gi * xh;
                        }
                        accumulate(&mut grads[gain.0], Tensor::vector(dg));
                    }
                    if wants(*bias) {
                        accumulate(&mut grads[bias.0], reduce_rows(&g, d));
                    }
                    if wants(*x) {
                        let mut dx = g.clone();
                        for (r, row) in dx.data_mut().chunks_mut(d).enumerate() {
                            let xh = &xhat[r * d..(r + 1) * d];
                            let dxhat: Vec<f64> =
                                row.iter().zip(gv).map(|(g, gain)| g * gain).collect();
                            let m1 = dxhat.iter().sum::<f64>() / d as f64;
                            let m2 =
                                dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                            for j in 0..d {
                                row[j] = inv_std[r] * (dxhat[j] - m1 - xh[j] * m2);
                            }
                        }
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::Sum(a) => {
                    let s = g.data()[0];
                    accumulate(&mut grads[a.0], Tensor::full(self.value(*a).shape(), s));
                }
                Op::Mean(a) => {
                    let ta = self.value(*a);
                    let s = g.data()[0] / ta.len() as f64;
                    accumulate(&mut grads[a.0], Tensor::full(ta.shape(), s));
                }
                Op::Reshape(a) => {
                    let ga = g.reshape(self.value(*a).shape())?;
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Gather(a, index) => {
                    let mut ga = Tensor::zeros(self.value(*a).shape());
                    let buf = ga.data_mut();
                    for (&i, gv) in index.iter().zip(g.data()) {
                        buf[i] += gv;
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).cols();
                    let cb = self.value(*b).cols();
                    let rows = g.rows();
                    let mut da = Vec::with_capacity(rows * ca);
                    let mut db = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        let row = g.row(r);
                        da.extend_from_slice(&row[..ca]);
                        db.extend_from_slice(&row[ca..]);
                    }
                    if wants(*a) {
                        accumulate(&mut grads[a.0], Tensor::new(vec![rows, ca], da)?);
                    }
                    if wants(*b) {
                        accumulate(&mut grads[b.0], Tensor::new(vec![rows, cb], db)?);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn transpose_last2(t: &Tensor) -> Tensor {
    let s = t.shape();
    let (bs, m, n) = (s[0], s[1], s[2]);
    let src = t.data();
    let mut out = vec![0.0; src.len()];
    for b in 0..bs {
        for i in 0..m {
            for j in 0..n {
                out[b * m * n + j * m + i] = src[b * m * n + i * n + j];
            }
        }
    }
    Tensor::new(vec![bs, n, m], out).expect("same element count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngStream;

    /// Norm-wise relative error between two gradient buffers.
    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let na: f64 = a.iter().map(|x| x * x).sum();
        let nb: f64 = b.iter().map(|x| x * x).sum();
        libm::sqrt(diff) / libm::sqrt(na.max(nb)).max(1e-12)
    }

    fn random(rng: &mut RngStream, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform() * 2.0 - 1.0).collect()).unwrap()
    }

    /// Central differences of `f` around every leaf value.
    fn check<F>(inputs: Vec<Tensor>, f: F)
    where
        F: Fn(&mut Tape, &[Var]) -> Var,
    {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = f(&mut tape, &vars);
        let grads = tape.backward(loss).unwrap();
        let h = 1e-6;
        for (k, input) in inputs.iter().enumerate() {
            let mut numeric = vec![0.0; input.len()];
            for i in 0..input.len() {
                let eval = |delta: f64| {
                    let mut t = Tape::new();
                    let vs: Vec<Var> = inputs
                        .iter()
                        .enumerate()
                        .map(|(j, x)| {
                            let mut x = x.clone();
                            if j == k {
                                x.data_mut()[i] += delta;
                            }
                            t.leaf(x)
                        })
                        .collect();
                    let l = f(&mut t, &vs);
                    t.value(l).data()[0]
                };
                numeric[i] = (eval(h) - eval(-h)) / (2.0 * h);
            }
            let analytic = grads.get(vars[k]).map(|g| g.data().to_vec()).unwrap_or(vec![0.0; input.len()]);
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-5, "input {k}: rel err {err}");
        }
    }

    #[test]
    fn sum_gives_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn mean_square_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let zero = tape.constant(Tensor::scalar(0.0));
        let l = tape.mse(x, zero).unwrap();
        let g = tape.backward(l).unwrap();
        assert!((g.get(x).unwrap().data()[0] - 6.0).abs() < 1e-15);
        assert!(g.get(zero).is_none());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn fd_matmul_and_broadcast() {
        let mut rng = RngStream::new(1);
        let inputs = vec![random(&mut rng, &[3, 4]), random(&mut rng, &[4, 2]), random(&mut rng, &[2])];
        let w = random(&mut rng, &[3, 2]);
        check(inputs, move |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            let y = t.add(y, v[2]).unwrap();
            let c = t.constant(w.clone());
            let y = t.mul(y, c).unwrap();
            t.sum(y)
        });
    }

    #[test]
    fn fd_elementwise_family() {
        let mut rng = RngStream::new(2);
        let inputs = vec![random(&mut rng, &[2, 5]), random(&mut rng, &[2, 5]), random(&mut rng, &[5])];
        check(inputs, |t, v| {
            let a = t.sub(v[0], v[1]).unwrap();
            let b = t.mul(a, v[2]).unwrap();
            let c = t.gelu(b);
            let d = t.relu(v[1]);
            let e = t.add(c, d).unwrap();
            let f = t.sub(e, v[2]).unwrap();
            let s = t.scale(f, 1.7);
            let sq = t.mul(s, s).unwrap();
            t.mean(sq)
        });
    }

    #[test]
    fn fd_softmax_layer_norm() {
        let mut rng = RngStream::new(3);
        let inputs = vec![random(&mut rng, &[3, 4]), random(&mut rng, &[4]), random(&mut rng, &[4])];
        let w = random(&mut rng, &[3, 4]);
        check(inputs, move |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap();
            let s = t.softmax(y);
            let c = t.constant(w.clone());
            let p = t.mul(s, c).unwrap();
            let q = t.mul(p, y).unwrap();
            t.sum(q)
        });
    }

    #[test]
    fn fd_batch_matmul_gather_concat() {
        let mut rng = RngStream::new(4);
        let inputs = vec![random(&mut rng, &[2, 3, 2]), random(&mut rng, &[2, 2, 3]), random(&mut rng, &[3, 2])];
        let w = random(&mut rng, &[2, 3, 3]);
        check(inputs, move |t, v| {
            let p = t.batch_matmul(v[0], v[1]).unwrap();
            let c = t.constant(w.clone());
            let p = t.mul(p, c).unwrap();
            let flat = t.reshape(p, &[6, 3]).unwrap();
            // Transpose of flat via gather, then repeat rows.
            let index: Vec<usize> = (0..3).flat_map(|j| (0..6).map(move |i| i * 3 + j)).collect();
            let tr = t.gather(flat, index, &[3, 6]).unwrap();
            let cat = t.concat_cols(tr, v[2]).unwrap();
            let rep: Vec<usize> = (0..24).chain(0..24).collect();
            let r = t.gather(cat, rep, &[6, 8]).unwrap();
            let sq = t.mul(r, r).unwrap();
            t.sum(sq)
        });
    }

    #[test]
    fn shared_parent_accumulates() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![2.0]));
        let y = tape.mul(x, x).unwrap();
        let z = tape.add(y, x).unwrap();
        let s = tape.sum(z);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[5.0]);
    }

    #[test]
    fn topological_ids() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0]));
        let b = tape.relu(a);
        let c = tape.add(a, b).unwrap();
        assert!(a < b && b < c);
        assert_eq!(tape.len(), 3);
    }
}
