use alloc::vec::Vec;

use crate::numcore::Tensor;
use crate::{Error, Result};

/// Sorted training columns and their sample skewness.
#[derive(Debug, Clone, PartialEq)]
pub struct CopodModel {
    pub sorted: Vec<Vec<f64>>,
    pub skewness: Vec<f64>,
}

/// Sample skewness `g1 = m3 / m2^{3/2}` (population moments); 0 for a
/// constant column.
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean) * (x - mean) * (x - mean)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / libm::pow(m2, 1.5)
    }
}

pub fn copod_fit(data: &Tensor) -> Result<CopodModel> {
    if data.ndim() != 2 || data.rows() < 2 {
        return Err(Error::Fit("COPOD needs at least 2 rows".into()));
    }
    if !data.is_finite() {
        return Err(Error::Fit("training data holds NaN or infinity".into()));
    }
    let (n, d) = (data.rows(), data.cols());
    let mut sorted = Vec::with_capacity(d);
    let mut skew = Vec::with_capacity(d);
    for f in 0..d {
        let mut col: Vec<f64> = (0..n).map(|r| data.row(r)[f]).collect();
        skew.push(skewness(&col));
        col.sort_by(f64::total_cmp);
        sorted.push(col);
    }
    Ok(CopodModel {
        sorted,
        skewness: skew,
    })
}

impl CopodModel {
    pub fn dim(&self) -> usize {
        self.sorted.len()
    }

    /// Left and right empirical tail probabilities `F(x) = #{X ≤ x}/n` and
    /// `F̄(x) = #{X ≥ x}/n`, each clamped to `[1/n, 1]`.
    pub fn tails(&self, feature: usize, x: f64) -> (f64, f64) {
        let col = &self.sorted[feature];
        let n = col.len() as f64;
        let le = col.partition_point(|&v| v <= x) as f64;
        let ge = n - col.partition_point(|&v| v < x) as f64;
        ((le / n).clamp(1.0 / n, 1.0), (ge / n).clamp(1.0 / n, 1.0))
    }

    /// `(O_left, O_right, O_skew)` for one row: negative log tail
    /// probabilities summed over features; the skew-corrected sum uses the
    /// left tail where `g1 < 0` and the right tail otherwise.
    pub fn tail_scores(&self, x: &[f64]) -> (f64, f64, f64) {
        let (mut l, mut r, mut s) = (0.0, 0.0, 0.0);
        for (f, &v) in x.iter().enumerate() {
            let (pl, pr) = self.tails(f, v);
            let (nl, nr) = (-libm::log(pl), -libm::log(pr));
            l += nl;
            r += nr;
            s += if self.skewness[f] < 0.0 { nl } else { nr };
        }
        (l, r, s)
    }

    pub fn score(&self, x: &Tensor) -> Result<Vec<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::shape("copod score", x.shape(), &[self.dim()]));
        }
        Ok((0..x.rows())
            .map(|r| {
                let (l, rt, s) = self.tail_scores(x.row(r));
                l.max(rt).max(s)
            })
            .collect())
    }
}
