use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifiers::Criterion;

pub(crate) const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// `LEAF` for leaves.
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Fraction of positive training samples reaching the node.
    pub value: f64,
}

/// A CART tree; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

pub(crate) struct TreeSettings {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: usize,
    pub criterion: Criterion,
}

fn impurity(pos: f64, total: f64, criterion: Criterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    let q = 1.0 - p;
    match criterion {
        Criterion::Gini => 1.0 - p * p - q * q,
        Criterion::Entropy => {
            let h = |v: f64| if v > 0.0 { -v * v.log2() } else { 0.0 };
            h(p) + h(q)
        }
    }
}

impl DecisionTree {
    /// Grows a tree on the (possibly repeated) rows in `samples`.
    pub(crate) fn grow<R: Rng>(
        x: &Array2<f64>,
        y: &[f64],
        samples: Vec<usize>,
        settings: &TreeSettings,
        rng: &mut R,
    ) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        tree.split(x, y, samples, 0, settings, rng);
        tree
    }

    fn split<R: Rng>(
        &mut self,
        x: &Array2<f64>,
        y: &[f64],
        samples: Vec<usize>,
        depth: usize,
        s: &TreeSettings,
        rng: &mut R,
    ) -> usize {
        let n = samples.len();
        let pos = samples.iter().filter(|&&i| y[i] > 0.0).count();
        let id = self.nodes.len();
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: pos as f64 / n as f64,
        });
        if depth >= s.max_depth || n < s.min_samples_split || pos == 0 || pos == n {
            return id;
        }
        let Some((feature, threshold)) = best_split(x, y, &samples, pos, s, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| x[[i, feature]] <= threshold);
        let l = self.split(x, y, left, depth + 1, s, rng);
        let r = self.split(x, y, right, depth + 1, s, rng);
        let node = &mut self.nodes[id];
        node.feature = feature;
        node.threshold = threshold;
        node.left = l;
        node.right = r;
        id
    }

    pub fn leaf_value(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if x[node.feature] <= node.threshold { node.left } else { node.right };
        }
    }

    /// Majority vote; an even leaf votes negative.
    pub fn votes_positive(&self, x: ArrayView1<f64>) -> bool {
        self.leaf_value(x) > 0.5
    }

    pub fn root_feature(&self) -> Option<usize> {
        self.nodes.first().filter(|n| n.feature != LEAF).map(|n| n.feature)
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(t, n.left).max(walk(t, n.right))
            }
        }
        walk(self, 0)
    }
}

/// Scans features in random order until `max_features` non-constant ones
/// have been examined; midpoint thresholds, ascending, strict improvement.
fn best_split<R: Rng>(
    x: &Array2<f64>,
    y: &[f64],
    samples: &[usize],
    pos: usize,
    s: &TreeSettings,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let n = samples.len() as f64;
    let mut features: Vec<usize> = (0..x.ncols()).collect();
    features.shuffle(rng);

    let mut best: Option<(f64, usize, f64)> = None;
    let mut seen = 0;
    let mut order: Vec<(f64, bool)> = Vec::with_capacity(samples.len());
    for f in features {
        if seen >= s.max_features {
            break;
        }
        order.clear();
        order.extend(samples.iter().map(|&i| (x[[i, f]], y[i] > 0.0)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        if order[0].0 == order[order.len() - 1].0 {
            continue;
        }
        seen += 1;
        let mut left_pos = 0.0;
        for k in 1..order.len() {
            if order[k - 1].1 {
                left_pos += 1.0;
            }
            if order[k - 1].0 == order[k].0 {
                continue;
            }
            let nl = k as f64;
            let nr = n - nl;
            let right_pos = pos as f64 - left_pos;
            let score = nl * impurity(left_pos, nl, s.criterion) + nr * impurity(right_pos, nr, s.criterion);
            if best.map_or(true, |b| score < b.0) {
                let mut thr = 0.5 * (order[k - 1].0 + order[k].0);
                if thr >= order[k].0 {
                    thr = order[k - 1].0;
                }
                best = Some((score, f, thr));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
