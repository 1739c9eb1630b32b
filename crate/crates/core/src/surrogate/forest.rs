use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::MboRng;

/// Predictive-variance estimator of a regression forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceEstimator {
    /// Bias-corrected jackknife-after-bootstrap.
    Jackknife,
    /// Spread of the tree predictions.
    Esd,
    /// Law of total variance over the leaves.
    Ltv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub estimator: VarianceEstimator,
    /// Nodes with at most this many rows are not split.
    pub min_node_size: usize,
    pub min_bucket: usize,
    pub mtry_ratio: f64,
    /// Lower bound on leaf variances used by [`VarianceEstimator::Ltv`].
    pub min_leaf_variance: f64,
    /// One uniformly drawn threshold per candidate feature.
    pub extratrees: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            estimator: VarianceEstimator::Ltv,
            min_node_size: 3,
            min_bucket: 3,
            mtry_ratio: 5.0 / 6.0,
            min_leaf_variance: 1e-2,
            extratrees: false,
        }
    }
}

impl ForestConfig {
    /// Small forest substituted when the primary surrogate cannot be fitted.
    pub fn fallback() -> Self {
        ForestConfig {
            n_trees: 10,
            estimator: VarianceEstimator::Jackknife,
            ..ForestConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left; missing values follow
    /// `missing_left`.
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
        variance: f64,
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Tree from explicit nodes; node 0 is the root.
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        assert!(!nodes.is_empty(), "tree needs a root");
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Mean and variance of the leaf that `x` falls into.
    pub fn leaf(&self, x: &[f64]) -> (f64, f64) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { mean, variance, .. } => return (*mean, *variance),
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                } => {
                    let v = x[*feature];
                    let go_left = if v.is_nan() { *missing_left } else { v <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged CART regression trees with in-bag counts kept for jackknife
/// variance estimates.
#[derive(Debug, Clone)]
pub struct Forest {
    config: ForestConfig,
    trees: Vec<Tree>,
    /// `inbag[b][i]` is how often training row `i` was drawn for tree `b`.
    inbag: Vec<Vec<u32>>,
    n_never_oob: usize,
}

/// Compact description of a fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForestSummary {
    pub n_trees: usize,
    pub n_train: usize,
    pub estimator: VarianceEstimator,
    pub mean_leaves: f64,
    pub max_depth: usize,
    pub n_never_oob: usize,
}

impl Forest {
    /// Fits the forest on rows `x` (missing values as `NaN`) and targets `y`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig, rng: &mut MboRng) -> Result<Forest, SurrogateError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(SurrogateError::TooFewPoints(n));
        }
        if cfg.n_trees < 2 {
            return Err(SurrogateError::FitFailed(format!("{} trees; need at least 2", cfg.n_trees)));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::FitFailed("non-finite targets".into()));
        }
        let p = x[0].len();
        let mtry = ((cfg.mtry_ratio * p as f64).ceil() as usize).clamp(1, p.max(1));
        let mut trees = Vec::with_capacity(cfg.n_trees);
        let mut inbag = Vec::with_capacity(cfg.n_trees);
        for _ in 0..cfg.n_trees {
            let mut counts = vec![0u32; n];
            let mut sample = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                counts[i] += 1;
                sample.push(i);
            }
            sample.sort_unstable();
            trees.push(grow(x, y, sample, cfg, mtry, rng));
            inbag.push(counts);
        }
        let forest = Forest::from_parts(trees, inbag, cfg.clone());
        if cfg.estimator == VarianceEstimator::Jackknife && forest.n_never_oob > 0 {
            log::warn!(
                "{} training rows are in-bag for every tree; skipped in jackknife variance",
                forest.n_never_oob
            );
        }
        Ok(forest)
    }

    /// Assembles a forest from given trees and in-bag counts.
    pub fn from_parts(trees: Vec<Tree>, inbag: Vec<Vec<u32>>, config: ForestConfig) -> Forest {
        assert_eq!(trees.len(), inbag.len(), "one in-bag vector per tree");
        let n = inbag.first().map_or(0, Vec::len);
        let n_never_oob = (0..n).filter(|&i| inbag.iter().all(|c| c[i] > 0)).count();
        Forest {
            config,
            trees,
            inbag,
            n_never_oob,
        }
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn inbag(&self) -> &[Vec<u32>] {
        &self.inbag
    }

    pub fn n_train(&self) -> usize {
        self.inbag.first().map_or(0, Vec::len)
    }

    /// Mean and standard deviation with the configured estimator.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        self.predict_with(x, self.config.estimator)
    }

    pub fn predict_with(&self, x: &[f64], estimator: VarianceEstimator) -> (f64, f64) {
        let leaves: Vec<(f64, f64)> = self.trees.iter().map(|t| t.leaf(x)).collect();
        let b = leaves.len() as f64;
        let mean = leaves.iter().map(|l| l.0).sum::<f64>() / b;
        let spread: f64 = leaves.iter().map(|l| (l.0 - mean).powi(2)).sum();
        let var = match estimator {
            VarianceEstimator::Esd => {
                if leaves.len() > 1 {
                    spread / (b - 1.0)
                } else {
                    0.0
                }
            }
            VarianceEstimator::Ltv => {
                let floor = self.config.min_leaf_variance;
                // mean of floored leaf variances plus variance of leaf means
                leaves.iter().map(|l| l.1.max(floor)).sum::<f64>() / b + spread / b
            }
            VarianceEstimator::Jackknife => self.jackknife(&leaves, mean, spread),
        };
        (mean, var.max(0.0).sqrt())
    }

    fn jackknife(&self, leaves: &[(f64, f64)], mean: f64, spread: f64) -> f64 {
        let n = self.n_train();
        let b = leaves.len() as f64;
        let mut sum_sq = 0.0;
        let mut used = 0usize;
        for i in 0..n {
            let (mut s, mut c) = (0.0, 0usize);
            for (t, counts) in leaves.iter().zip(&self.inbag) {
                if counts[i] == 0 {
                    s += t.0;
                    c += 1;
                }
            }
            if c > 0 {
                sum_sq += (s / c as f64 - mean).powi(2);
                used += 1;
            }
        }
        if used == 0 {
            return 0.0;
        }
        let n = used as f64;
        let raw = (n - 1.0) / n * sum_sq - (std::f64::consts::E - 1.0) * n / (b * b) * spread;
        raw.max(0.0)
    }

    /// Out-of-bag prediction per training row (`NaN` if always in-bag).
    pub fn oob_predictions(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, xi)| {
                let (mut s, mut c) = (0.0, 0usize);
                for (t, counts) in self.trees.iter().zip(&self.inbag) {
                    if counts[i] == 0 {
                        s += t.leaf(xi).0;
                        c += 1;
                    }
                }
                if c > 0 {
                    s / c as f64
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    pub fn summary(&self) -> ForestSummary {
        let leaves: usize = self
            .trees
            .iter()
            .map(|t| t.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count())
            .sum();
        ForestSummary {
            n_trees: self.trees.len(),
            n_train: self.n_train(),
            estimator: self.config.estimator,
            mean_leaves: leaves as f64 / self.trees.len().max(1) as f64,
            max_depth: self.trees.iter().map(Tree::depth).max().unwrap_or(0),
            n_never_oob: self.n_never_oob,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "summary": self.summary(),
            "config": self.config,
            "trees": self.trees,
            "inbag": self.inbag,
        })
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    missing_left: bool,
    score: f64,
}

fn grow(x: &[Vec<f64>], y: &[f64], sample: Vec<usize>, cfg: &ForestConfig, mtry: usize, rng: &mut MboRng) -> Tree {
    let mut nodes = vec![Node::Leaf {
        mean: 0.0,
        variance: 0.0,
        size: 0,
    }];
    let mut stack = vec![(0usize, sample)];
    while let Some((id, rows)) = stack.pop() {
        match best_split(x, y, &rows, cfg, mtry, rng) {
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| {
                    let v = x[i][s.feature];
                    if v.is_nan() {
                        s.missing_left
                    } else {
                        v <= s.threshold
                    }
                });
                let left = nodes.len();
                let right = left + 1;
                nodes.push(nodes[0].clone());
                nodes.push(nodes[0].clone());
                nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    missing_left: s.missing_left,
                    left,
                    right,
                };
                stack.push((right, r));
                stack.push((left, l));
            }
            None => {
                let m = rows.len() as f64;
                let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / m;
                let variance = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>() / m;
                nodes[id] = Node::Leaf {
                    mean,
                    variance,
                    size: rows.len(),
                };
            }
        }
    }
    Tree { nodes }
}

fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    cfg: &ForestConfig,
    mtry: usize,
    rng: &mut MboRng,
) -> Option<Split> {
    let n = rows.len();
    if n <= cfg.min_node_size {
        return None;
    }
    let y0 = y[rows[0]];
    if rows.iter().all(|&i| y[i] == y0) {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    let parent = total * total / n as f64;
    let p = x[0].len();
    let features = rand::seq::index::sample(rng, p, mtry.min(p));

    let mut best: Option<Split> = None;
    let mut vals: Vec<(f64, f64)> = Vec::with_capacity(n);
    for f in features.iter() {
        vals.clear();
        let (mut miss_sum, mut miss_n) = (0.0, 0usize);
        for &i in rows {
            let v = x[i][f];
            if v.is_nan() {
                miss_sum += y[i];
                miss_n += 1;
            } else {
                vals.push((v, y[i]));
            }
        }
        if vals.len() < 2 {
            continue;
        }
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lo = vals[0].0;
        let hi = vals[vals.len() - 1].0;
        if lo == hi {
            continue;
        }
        let m = vals.len();
        let consider = |nl: usize, sl: f64, threshold: f64, best: &mut Option<Split>| {
            let nr = m - nl;
            let sr = total - miss_sum - sl;
            let missing_left = nl >= nr;
            let (fnl, fsl, fnr, fsr) = if missing_left {
                (nl + miss_n, sl + miss_sum, nr, sr)
            } else {
                (nl, sl, nr + miss_n, sr + miss_sum)
            };
            if fnl < cfg.min_bucket || fnr < cfg.min_bucket {
                return;
            }
            let score = fsl * fsl / fnl as f64 + fsr * fsr / fnr as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                *best = Some(Split {
                    feature: f,
                    threshold,
                    missing_left,
                    score,
                });
            }
        };
        if cfg.extratrees {
            let t = rng.random_range(lo..hi);
            let nl = vals.partition_point(|v| v.0 <= t);
            let sl: f64 = vals[..nl].iter().map(|v| v.1).sum();
            consider(nl, sl, t, &mut best);
        } else {
            let mut sl = 0.0;
            for k in 0..m - 1 {
                sl += vals[k].1;
                let (a, b) = (vals[k].0, vals[k + 1].0);
                if a < b {
                    let mut t = a + 0.5 * (b - a);
                    if t >= b {
                        t = a;
                    }
                    consider(k + 1, sl, t, &mut best);
                }
            }
        }
    }
    let gain_tol = 1e-12 * total_sq.max(f64::MIN_POSITIVE);
    best.filter(|b| b.score - parent > gain_tol)
}
