use alloc::vec::Vec;

use crate::numcore::{RngStream, Tensor};
use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Average path length of an unsuccessful BST search over `n` points:
/// `c(n) = 2·H(n−1) − 2(n−1)/n` with `H(i) = ln i + γ`, and `c(n) = 0` for
/// `n ≤ 1`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * (libm::log(m) + EULER_GAMMA) - 2.0 * m / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsoNode {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Nodes stored in an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    pub nodes: Vec<IsoNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel {
    pub subsample: usize,
    pub height_limit: usize,
    pub dim: usize,
    pub trees: Vec<IsolationTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IForestConfig {
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        IForestConfig {
            n_trees: 100,
            subsample: 256,
            seed: 0,
        }
    }
}

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - (n.max(1) - 1).leading_zeros()) as usize
}

struct Builder<'a> {
    data: &'a Tensor,
    limit: usize,
    rng: &'a mut RngStream,
    nodes: Vec<IsoNode>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(IsoNode::Leaf { size: rows.len() });
        if depth >= self.limit || rows.len() <= 1 {
            return id;
        }
        let d = self.data.cols();
        let mut spans = Vec::with_capacity(d);
        for f in 0..d {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &r in rows {
                let v = self.data.row(r)[f];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                spans.push((f, lo, hi));
            }
        }
        if spans.is_empty() {
            return id;
        }
        let (feature, lo, hi) = spans[self.rng.below(spans.len())];
        let mut value = self.rng.uniform_range(lo, hi);
        if !(value > lo && value < hi) {
            value = lo + 0.5 * (hi - lo);
            if !(value > lo && value < hi) {
                // Adjacent floats: no representable value lies strictly between.
                return id;
            }
        }
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.data.row(i)[feature] < value);
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[id] = IsoNode::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }
}

impl IsolationTree {
    /// Depth at which `x` lands plus `c(leaf size)` for truncated leaves.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                IsoNode::Leaf { size } => return depth + average_path_length(size),
                IsoNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[feature] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[IsoNode], i: usize) -> usize {
            match nodes[i] {
                IsoNode::Leaf { .. } => 0,
                IsoNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Builds `n_trees` isolation trees on independent subsamples of
/// `min(subsample, n)` rows drawn without replacement.
pub fn iforest_fit(data: &Tensor, config: &IForestConfig) -> Result<IsolationForestModel> {
    let n = data.rows();
    if data.ndim() != 2 || n < 2 {
        return Err(Error::Fit("isolation forest needs at least 2 rows".into()));
    }
    if config.n_trees == 0 || config.subsample < 2 {
        return Err(Error::Config("need n_trees >= 1 and subsample >= 2".into()));
    }
    if !data.is_finite() {
        return Err(Error::Fit("training data holds NaN or infinity".into()));
    }
    let psi = config.subsample.min(n);
    let limit = ceil_log2(psi);
    let mut rng = RngStream::new(config.seed);
    let trees = (0..config.n_trees)
        .map(|_| {
            let rows = rng.sample_indices(n, psi);
            let mut b = Builder {
                data,
                limit,
                rng: &mut rng,
                nodes: Vec::new(),
            };
            b.build(&rows, 0);
            IsolationTree { nodes: b.nodes }
        })
        .collect();
    Ok(IsolationForestModel {
        subsample: psi,
        height_limit: limit,
        dim: data.cols(),
        trees,
    })
}

impl IsolationForestModel {
    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// `s(x) = 2^(−E[h(x)]/c(ψ))`, in `(0, 1)`; higher = more anomalous.
    pub fn score(&self, x: &Tensor) -> Result<Vec<f64>> {
        if x.cols() != self.dim {
            return Err(Error::shape("iforest score", x.shape(), &[self.dim]));
        }
        let c = average_path_length(self.subsample);
        Ok((0..x.rows())
            .map(|r| libm::exp2(-self.mean_path_length(x.row(r)) / c))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_of_two() {
        let expect = 2.0 * (0.0 + 0.577_215_664_9) - 1.0;
        assert!((average_path_length(2) - expect).abs() < 1e-15);
        assert!((average_path_length(2) - 0.154_431_3).abs() < 1e-7);
        assert_eq!(average_path_length(1), 0.0);
    }

    #[test]
    fn expected_path_at_c_gives_half() {
        let c = average_path_length(256);
        assert_eq!(libm::exp2(-c / c), 0.5);
    }

    #[test]
    fn identical_points_are_single_leaves() {
        let data = Tensor::full(&[50, 3], 1.25);
        let m = iforest_fit(&data, &IForestConfig { n_trees: 10, ..Default::default() }).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        let s = m.score(&data).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
        assert!((s[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_outlier_ranks_first() {
        let mut v = alloc::vec![0.0; 99];
        v.push(10.0);
        let data = Tensor::new(alloc::vec![100, 1], v).unwrap();
        let m = iforest_fit(&data, &IForestConfig::default()).unwrap();
        let s = m.score(&data).unwrap();
        let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(s[99], top);
        assert!(s[..99].iter().all(|&x| x < s[99]));
    }

    #[test]
    fn deterministic_and_bounded() {
        let data = RngStream::new(3).gaussian_tensor(&[300, 4]);
        let cfg = IForestConfig { n_trees: 20, subsample: 64, seed: 7 };
        let a = iforest_fit(&data, &cfg).unwrap();
        let b = iforest_fit(&data, &cfg).unwrap();
        assert_eq!(a, b);
        let s = a.score(&data).unwrap();
        assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(a.height_limit, 6);
        assert!(a.trees.iter().all(|t| t.depth() <= 6));
    }

    #[test]
    fn splits_lie_strictly_inside_node_range() {
        let data = RngStream::new(4).gaussian_tensor(&[128, 2]);
        let m = iforest_fit(&data, &IForestConfig { n_trees: 5, subsample: 128, seed: 1 }).unwrap();
        // Subsample of 128 from 128 rows is a permutation of all rows.
        for tree in &m.trees {
            fn walk(t: &IsolationTree, node: usize, rows: Vec<usize>, data: &Tensor) {
                if let IsoNode::Split { feature, value, left, right } = t.nodes[node] {
                    let vals: Vec<f64> = rows.iter().map(|&r| data.row(r)[feature]).collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    assert!(value > lo && value < hi);
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.row(i)[feature] < value);
                    walk(t, left, l, data);
                    walk(t, right, r, data);
                }
            }
            walk(tree, 0, (0..128).collect(), &data);
        }
    }

    #[test]
    fn fit_errors() {
        let one = Tensor::zeros(&[1, 2]);
        assert!(matches!(iforest_fit(&one, &IForestConfig::default()), Err(Error::Fit(_))));
    }
}
