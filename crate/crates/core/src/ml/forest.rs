//! Random forest of CART trees grown on weighted Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_finite, class_weights};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVector};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// max(1, floor(sqrt(p)))
    #[default]
    Sqrt,
    /// max(1, floor(log2(p)))
    Log2,
    All,
    #[serde(untagged)]
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, p.max(1))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub max_features: MaxFeatures,
    #[serde(default)]
    pub class_weighted: bool,
    /// Draw a bootstrap sample per tree; otherwise every tree sees all rows.
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn new(n_trees: usize, max_depth: Option<usize>) -> Self {
        Self {
            n_trees,
            max_depth,
            max_features: MaxFeatures::Sqrt,
            class_weighted: false,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Weighted class fractions [control, bipolar].
    Leaf { fractions: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, row: &SparseVector) -> [f64; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { fractions } => return *fractions,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Class vote; equal fractions vote control.
    pub fn vote(&self, row: &SparseVector) -> u8 {
        let f = self.leaf_for(row);
        u8::from(f[1] > f[0])
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub width: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Fraction of trees voting bipolar.
    pub fn scores(&self, rows: &[SparseVector]) -> Vec<f64> {
        rows.iter()
            .map(|r| {
                let votes: usize = self.trees.iter().map(|t| t.vote(r) as usize).sum();
                votes as f64 / self.trees.len() as f64
            })
            .collect()
    }

    /// Majority vote; ties go to control.
    pub fn predict_rows(&self, rows: &[SparseVector]) -> Vec<u8> {
        rows.iter()
            .map(|r| {
                let votes: usize = self.trees.iter().map(|t| t.vote(r) as usize).sum();
                u8::from(2 * votes > self.trees.len())
            })
            .collect()
    }
}

struct Grower<'a> {
    rows: &'a [SparseVector],
    labels: &'a [u8],
    width: usize,
    mtry: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        return 0.0;
    }
    let (p0, p1) = (w0 / w, w1 / w);
    1.0 - p0 * p0 - p1 * p1
}

impl Grower<'_> {
    fn totals(&self, samples: &[(usize, f64)]) -> [f64; 2] {
        let mut t = [0.0; 2];
        for &(i, w) in samples {
            t[self.labels[i] as usize] += w;
        }
        t
    }

    /// Best threshold on one feature, or `None` when it is constant here.
    fn split_on(&self, feature: usize, samples: &[(usize, f64)], totals: [f64; 2]) -> Option<BestSplit> {
        let mut vals: Vec<(f64, u8, f64)> = samples
            .iter()
            .map(|&(i, w)| (self.rows[i].get(feature), self.labels[i], w))
            .collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if vals.first()?.0 == vals.last()?.0 {
            return None;
        }
        let total = totals[0] + totals[1];
        let mut left = [0.0; 2];
        let mut best: Option<BestSplit> = None;
        for k in 0..vals.len() - 1 {
            left[vals[k].1 as usize] += vals[k].2;
            let (lo, hi) = (vals[k].0, vals[k + 1].0);
            if lo == hi {
                continue;
            }
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let wl = left[0] + left[1];
            let wr = right[0] + right[1];
            let imp = (wl * gini(left[0], left[1]) + wr * gini(right[0], right[1])) / total;
            if best.as_ref().is_none_or(|b| imp < b.impurity - 1e-12) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(BestSplit {
                    feature,
                    threshold,
                    impurity: imp,
                });
            }
        }
        best
    }

    fn find_split<R: Rng>(&self, samples: &[(usize, f64)], totals: [f64; 2], rng: &mut R) -> Option<BestSplit> {
        let mut order: Vec<usize> = (0..self.width).collect();
        order.shuffle(rng);
        let mut candidates = order[..self.mtry].to_vec();
        candidates.sort_unstable();
        let pick = |cands: &[usize]| {
            let mut best: Option<BestSplit> = None;
            for &f in cands {
                if let Some(s) = self.split_on(f, samples, totals) {
                    if best.as_ref().is_none_or(|b| s.impurity < b.impurity - 1e-12) {
                        best = Some(s);
                    }
                }
            }
            best
        };
        if let Some(b) = pick(&candidates) {
            return Some(b);
        }
        // none of the drawn features vary here: keep drawing
        for &f in &order[self.mtry..] {
            if let Some(s) = self.split_on(f, samples, totals) {
                return Some(s);
            }
        }
        None
    }

    fn grow<R: Rng>(&mut self, samples: Vec<(usize, f64)>, depth: usize, rng: &mut R) -> usize {
        let totals = self.totals(&samples);
        let id = self.nodes.len();
        let w = totals[0] + totals[1];
        let leaf = Node::Leaf {
            fractions: [totals[0] / w, totals[1] / w],
        };
        self.nodes.push(leaf);
        let pure = totals[0] == 0.0 || totals[1] == 0.0;
        let depth_ok = self.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || samples.len() < 2 {
            return id;
        }
        let Some(split) = self.find_split(&samples, totals, rng) else {
            return id;
        };
        let (l, r): (Vec<_>, Vec<_>) = samples
            .into_iter()
            .partition(|&(i, _)| self.rows[i].get(split.feature) <= split.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Trains a forest. Tree `t` draws from its own stream keyed by `(seed, t)`,
/// so the result does not depend on the thread count.
pub fn train_forest(data: &FeatureMatrix, params: &ForestParams, seed: u64) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if params.max_depth == Some(0) {
        return Err(Error::Config("max_depth must be at least 1".into()));
    }
    if data.width() == 0 {
        return Err(Error::Empty("feature matrix has no columns".into()));
    }
    check_finite(data)?;
    let cw = class_weights(&data.labels)?;
    let n = data.len();
    let mtry = params.max_features.resolve(data.width());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, &[t as u64]);
            let mut counts = vec![0u32; n];
            if params.bootstrap {
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
            } else {
                counts.fill(1);
            }
            let samples: Vec<(usize, f64)> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| {
                    let w = if params.class_weighted {
                        cw[data.labels[i] as usize]
                    } else {
                        1.0
                    };
                    (i, c as f64 * w)
                })
                .collect();
            let mut g = Grower {
                rows: &data.rows,
                labels: &data.labels,
                width: data.width(),
                mtry,
                max_depth: params.max_depth,
                nodes: Vec::new(),
            };
            g.grow(samples, 0, &mut rng);
            Tree { nodes: g.nodes }
        })
        .collect();
    Ok(Forest {
        width: data.width(),
        trees,
    })
}
