//! Regression random forest (bagged CART with variance impurity) and
//! impurity-decrease feature importances.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::{FeatureTable, TimeSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` means `ceil(n_features / 3)`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_depth: None,
            min_samples_split: 2,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn mtry_for(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or(n_features.div_ceil(3))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Variance of the targets reaching this node.
        impurity: f64,
        n_samples: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        impurity: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } | TreeNode::Leaf { n_samples, .. } => *n_samples,
        }
    }

    pub fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split { impurity, .. } | TreeNode::Leaf { impurity, .. } => *impurity,
        }
    }
}

/// A regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Weighted impurity decrease of every split, credited to its feature.
    ///
    /// Each split contributes `(I_t - n_L/n_t I_L - n_R/n_t I_R) * n_t / N`
    /// where `N` is the root sample count.
    pub fn impurity_decreases(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        let total = self.nodes[0].n_samples() as f64;
        for node in &self.nodes {
            if let TreeNode::Split {
                feature,
                impurity,
                n_samples,
                left,
                right,
                ..
            } = node
            {
                out[*feature] += split_decrease(*impurity, *n_samples, &self.nodes[*left], &self.nodes[*right])
                    * *n_samples as f64
                    / total;
            }
        }
        out
    }
}

fn split_decrease(impurity: f64, n: usize, left: &TreeNode, right: &TreeNode) -> f64 {
    let nf = n as f64;
    impurity
        - (left.n_samples() as f64 / nf * left.impurity() + right.n_samples() as f64 / nf * right.impurity())
}

/// Candidate split of a node: decreases within this relative tolerance of the
/// best are treated as ties and resolved to the lowest `(feature, threshold)`.
pub const TIE_TOLERANCE: f64 = 1e-12;

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    config: &'a ForestConfig,
    mtry: usize,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = idx.len();
        let ys: Vec<f64> = idx.iter().map(|&i| self.y[i]).collect();
        let pure = ys.iter().all(|&v| v == ys[0]);
        let mean = if pure { ys[0] } else { crate::mean(&ys) };
        let impurity = if pure { 0.0 } else { crate::pop_variance(&ys) };
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: mean,
            impurity,
            n_samples: n,
        });
        if pure || n < self.config.min_samples_split || self.config.max_depth.is_some_and(|d| depth >= d) {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(&idx, mean, impurity, rng) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            impurity,
            n_samples: n,
            left,
            right,
        };
        slot
    }

    /// Visits features in a random order and stops once `mtry` features have
    /// been examined and at least one of them yields a positive decrease.
    fn best_split(&self, idx: &[usize], mean: f64, impurity: f64, rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n_features = self.x[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
        let floor = impurity * 1e-10;
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.mtry && candidates.iter().any(|c| c.2 > floor) {
                break;
            }
            candidates.extend(feature_splits(self.x, self.y, idx, f, mean, impurity));
        }
        pick_split(&candidates, floor)
    }
}

/// All midpoint thresholds of one feature with their impurity decreases.
fn feature_splits(x: &[Vec<f64>], y: &[f64], idx: &[usize], f: usize, mean: f64, impurity: f64) -> Vec<(usize, f64, f64)> {
    let mut sorted: Vec<usize> = idx.to_vec();
    sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
    let n = sorted.len() as f64;
    let (mut tot_s, mut tot_q) = (0.0, 0.0);
    for &i in &sorted {
        let c = y[i] - mean;
        tot_s += c;
        tot_q += c * c;
    }
    let (mut ls, mut lq) = (0.0, 0.0);
    let mut out = Vec::new();
    for k in 0..sorted.len() - 1 {
        let c = y[sorted[k]] - mean;
        ls += c;
        lq += c * c;
        let (a, b) = (x[sorted[k]][f], x[sorted[k + 1]][f]);
        if a == b {
            continue;
        }
        let mut thr = 0.5 * (a + b);
        if thr >= b {
            thr = a;
        }
        let nl = (k + 1) as f64;
        let nr = n - nl;
        let (rs, rq) = (tot_s - ls, tot_q - lq);
        let vl = (lq / nl - (ls / nl).powi(2)).max(0.0);
        let vr = (rq / nr - (rs / nr).powi(2)).max(0.0);
        out.push((f, thr, impurity - (nl / n * vl + nr / n * vr)));
    }
    out
}

fn pick_split(candidates: &[(usize, f64, f64)], floor: f64) -> Option<(usize, f64)> {
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if !(best > floor) {
        return None;
    }
    let tol = TIE_TOLERANCE * best.abs();
    candidates
        .iter()
        .filter(|c| c.2 >= best - tol)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|c| (c.0, c.1))
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    // splitmix64 finaliser over seed + golden-ratio stride
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(tree as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Single CART tree on the given sample indices.
pub fn grow_tree(x: &[Vec<f64>], y: &[f64], sample: Vec<usize>, config: &ForestConfig, rng: &mut ChaCha8Rng) -> Tree {
    let mut b = Builder {
        x,
        y,
        config,
        mtry: config.mtry_for(x[0].len()),
        nodes: Vec::new(),
    };
    b.build(sample, 0, rng);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    feature_names: Vec<String>,
    /// Importance shares summing to one; `None` when no tree split.
    raw_importances: Option<Vec<f64>>,
    standardized_importances: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Trains a forest on row-major features `x` and targets `y`.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], feature_names: Vec<String>, config: &ForestConfig) -> Result<Forest> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n < config.min_samples_split.max(2) {
        return Err(Error::TooFewPoints {
            needed: config.min_samples_split.max(2),
            got: n,
        });
    }
    let p = feature_names.len();
    if p == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != p) {
        return Err(Error::LengthMismatch(p, row.len()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    if config.min_samples_split < 2 {
        return Err(Error::InvalidArgument("min_samples_split must be at least 2".into()));
    }
    let mtry = config.mtry_for(p);
    if mtry == 0 || mtry > p {
        return Err(Error::InvalidArgument(format!("mtry = {mtry} outside 1..={p}")));
    }

    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.seed, t));
            let sample: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, sample, config, &mut rng)
        })
        .collect();

    let mut totals = vec![0.0; p];
    for tree in &trees {
        for (acc, v) in totals.iter_mut().zip(tree.impurity_decreases(p)) {
            *acc += v;
        }
    }
    let sum: f64 = totals.iter().sum();
    let mut warnings = Vec::new();
    let raw_importances = if sum > 0.0 {
        Some(totals.iter().map(|v| v / sum).collect::<Vec<_>>())
    } else {
        warnings.push("no tree contains a split (constant target?); importances undefined".to_string());
        None
    };
    let standardized_importances = raw_importances.as_deref().and_then(|r| standardize_importance(r).ok());
    Ok(Forest {
        trees,
        feature_names,
        raw_importances,
        standardized_importances,
        warnings,
    })
}

/// Trains on every indicator of `table` against `target`, which must share its index.
pub fn fit_forest_series(table: &FeatureTable, target: &TimeSeries, config: &ForestConfig) -> Result<Forest> {
    if target.index() != table.years() {
        return Err(Error::InvalidArgument("target index does not match the feature table".into()));
    }
    let x = table.indicator_rows()?;
    fit_forest(&x, target.complete_values()?, table.indicator_names(), config)
}

impl Forest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Mean of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::LengthMismatch(self.feature_names.len(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction input".into()));
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    /// Raw importances in feature order, normalised to sum to one.
    pub fn feature_importance(&self) -> Result<&[f64]> {
        self.raw_importances.as_deref().ok_or(Error::NoSplits)
    }

    pub fn standardized_importance(&self) -> Result<&[f64]> {
        let raw = self.feature_importance()?;
        match &self.standardized_importances {
            Some(s) => Ok(s),
            None => Err(standardize_importance(raw).err().unwrap_or(Error::ZeroVariance)),
        }
    }

    /// Features ranked by raw importance, rank 1 first.
    pub fn importance_table(&self) -> Result<Vec<ImportanceRow>> {
        let raw = self.feature_importance()?;
        let std = self.standardized_importances.as_deref();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
        Ok(order
            .iter()
            .enumerate()
            .map(|(rank, &i)| ImportanceRow {
                feature: self.feature_names[i].clone(),
                raw_importance: raw[i],
                standardized_importance: std.map(|s| s[i]),
                rank: rank + 1,
            })
            .collect())
    }
}

/// `(I - mean(I)) / std(I)` with the population standard deviation.
pub fn standardize_importance(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(Error::InvalidArgument("standardization needs at least two features".into()));
    }
    let m = crate::mean(raw);
    let s = crate::pop_variance(raw).sqrt();
    if !(s > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(raw.iter().map(|v| (v - m) / s).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub raw_importance: f64,
    pub standardized_importance: Option<f64>,
    pub rank: usize,
}

/// CSV with columns `feature,raw_importance,standardized_importance,rank`.
pub fn write_importance_csv<W: Write>(rows: &[ImportanceRow], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["feature", "raw_importance", "standardized_importance", "rank"])?;
    for r in rows {
        w.write_record(&[
            r.feature.clone(),
            format!("{:.6}", r.raw_importance),
            r.standardized_importance.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.rank.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<importance>".into(),
        source,
    })
}
