//! Bagged depth-limited decision trees with Gini splits.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ProbVector, TrainingSet};
use crate::dataset::{FeatureTensor, FEATURE_DAYS, N_CHANNELS};
use crate::hedge_engine::N_PERIODS;
use crate::rng::{derive_seed, stream_rng, SeedTag};
use crate::{Error, Result};

const N_FEATURES: usize = N_CHANNELS * FEATURE_DAYS;
/// Pseudo-count added to every leaf class.
const LEAF_SMOOTHING: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `sqrt(60)` rounded.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 50, max_depth: 6, min_samples_leaf: 5, max_features: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { probs: ProbVector },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes in arena order; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> ProbVector {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { probs } => return *probs,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn predict(&self, x: &FeatureTensor) -> Result<ProbVector> {
        if x.channels.len() != N_FEATURES {
            return Err(Error::input("forest input has the wrong width"));
        }
        let outs: Vec<ProbVector> = self.trees.iter().map(|t| t.predict(&x.channels)).collect();
        ProbVector::mean(&outs).ok_or_else(|| Error::config("forest has no trees"))
    }

    pub fn train(set: &TrainingSet<'_>, cfg: &ForestConfig) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::input("empty training set"));
        }
        if cfg.n_trees == 0 || cfg.min_samples_leaf == 0 {
            return Err(Error::config("forest needs n_trees >= 1 and min_samples_leaf >= 1"));
        }
        let max_features = cfg
            .max_features
            .unwrap_or_else(|| (N_FEATURES as f64).sqrt().round() as usize)
            .clamp(1, N_FEATURES);
        let trees = (0..cfg.n_trees)
            .map(|t| {
                let mut rng = stream_rng(derive_seed(cfg.seed, SeedTag::Bootstrap, t as u64), 0);
                let idx: Vec<usize> = if cfg.bootstrap {
                    (0..set.len()).map(|_| rng.random_range(0..set.len())).collect()
                } else {
                    (0..set.len()).collect()
                };
                let mut builder = Builder { set, cfg, max_features, rng, nodes: Vec::new() };
                builder.grow(idx, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Ok(ForestModel { trees })
    }
}

fn class_counts(set: &TrainingSet<'_>, idx: &[usize]) -> [f64; N_PERIODS] {
    let mut c = [0.0; N_PERIODS];
    for &i in idx {
        c[set.y[i]] += 1.0;
    }
    c
}

fn gini(counts: &[f64; N_PERIODS], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

fn leaf(counts: &[f64; N_PERIODS]) -> Node {
    let n: f64 = counts.iter().sum();
    let denom = n + LEAF_SMOOTHING * N_PERIODS as f64;
    let mut p = [0.0; N_PERIODS];
    for (slot, c) in p.iter_mut().zip(counts) {
        *slot = (c + LEAF_SMOOTHING) / denom;
    }
    Node::Leaf { probs: ProbVector(p) }
}

struct Builder<'a, 'b> {
    set: &'a TrainingSet<'b>,
    cfg: &'a ForestConfig,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = class_counts(self.set, &idx);
        let slot = self.nodes.len();
        self.nodes.push(leaf(&counts));
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_samples_leaf {
            return slot;
        }
        let parent = gini(&counts, idx.len() as f64);
        if parent == 0.0 {
            return slot;
        }
        let mut features = sample(&mut self.rng, N_FEATURES, self.max_features).into_vec();
        features.sort_unstable();
        let Some((feature, threshold)) = self.best_split(&idx, &features, parent) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.set.x[i].channels[feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split { feature, threshold, left, right };
        slot
    }

    /// Feature and threshold with the lowest weighted child impurity.
    fn best_split(&self, idx: &[usize], features: &[usize], parent: f64) -> Option<(usize, f64)> {
        let n = idx.len() as f64;
        let min_leaf = self.cfg.min_samples_leaf;
        let total = class_counts(self.set, idx);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for &f in features {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.set.x[i].channels[f], self.set.y[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0.0; N_PERIODS];
            for k in 0..sorted.len() - 1 {
                left[sorted[k].1] += 1.0;
                let n_left = k + 1;
                if sorted[k].0 == sorted[k + 1].0 || n_left < min_leaf || sorted.len() - n_left < min_leaf {
                    continue;
                }
                let mut right = total;
                for (r, l) in right.iter_mut().zip(&left) {
                    *r -= l;
                }
                let nl = n_left as f64;
                let impurity = (nl * gini(&left, nl) + (n - nl) * gini(&right, n - nl)) / n;
                if impurity < parent - 1e-12 && best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, 0.5 * (sorted[k].0 + sorted[k + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
