//! AUC-ROC with midrank ties, ROC curve points and aggregation of
//! benchmark results over seeds.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    /// 0 = normal, 1 = anomaly.
    pub labels: Vec<u8>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Metric(alloc::format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Metric("labels must be 0 or 1".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Metric("scores contain NaN".into()));
        }
        Ok(LabeledScores { scores, labels })
    }

    fn counts(&self) -> Result<(usize, usize)> {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        let neg = self.labels.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::Metric("AUC needs both normal and anomalous samples".into()));
        }
        Ok((pos, neg))
    }
}

/// Area under the ROC curve via the Mann–Whitney statistic with midranks:
/// `(Σ ranks of anomalies − n1(n1+1)/2) / (n1·n0)`. Tied pairs count ½.
pub fn auc_roc(ls: &LabeledScores) -> Result<f64> {
    let (n1, n0) = ls.counts()?;
    let mut order: Vec<usize> = (0..ls.scores.len()).collect();
    order.sort_by(|&a, &b| ls.scores[a].total_cmp(&ls.scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && ls.scores[order[j + 1]] == ls.scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        let pos = order[i..=j].iter().filter(|&&k| ls.labels[k] == 1).count();
        rank_sum += mid * pos as f64;
        i = j + 1;
    }
    let (n1f, n0f) = (n1 as f64, n0 as f64);
    Ok((rank_sum - n1f * (n1f + 1.0) / 2.0) / (n1f * n0f))
}

/// ROC curve as `(FPR, TPR)` points, one per distinct threshold in
/// descending order, from `(0, 0)` to `(1, 1)`.
pub fn roc_points(ls: &LabeledScores) -> Result<Vec<(f64, f64)>> {
    let (n1, n0) = ls.counts()?;
    let mut order: Vec<usize> = (0..ls.scores.len()).collect();
    order.sort_by(|&a, &b| ls.scores[b].total_cmp(&ls.scores[a]));
    let mut pts = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = ls.scores[order[i]];
        while i < order.len() && ls.scores[order[i]] == s {
            if ls.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pts.push((fp as f64 / n0 as f64, tp as f64 / n1 as f64));
    }
    Ok(pts)
}

/// Trapezoidal area under a polyline.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub auc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    pub method: String,
    pub mean_auc: f64,
    /// Population (1/n) standard deviation over seeds.
    pub std_auc: f64,
    pub runs: usize,
}

/// Groups results by `(dataset, method)`, sorted by that key, with mean and
/// population standard deviation of AUC.
pub fn aggregate(results: &[BenchmarkResult]) -> Vec<AggregateRow> {
    let mut sorted: Vec<&BenchmarkResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.dataset, &a.method, a.seed)
            .cmp(&(&b.dataset, &b.method, b.seed))
            .then(a.auc.total_cmp(&b.auc))
    });
    let mut rows = Vec::new();
    for group in sorted.chunk_by(|a, b| a.dataset == b.dataset && a.method == b.method) {
        let n = group.len() as f64;
        let mean = group.iter().map(|r| r.auc).sum::<f64>() / n;
        let var = group.iter().map(|r| (r.auc - mean) * (r.auc - mean)).sum::<f64>() / n;
        rows.push(AggregateRow {
            dataset: group[0].dataset.clone(),
            method: group[0].method.clone(),
            mean_auc: mean,
            std_auc: libm::sqrt(var),
            runs: group.len(),
        });
    }
    rows
}
