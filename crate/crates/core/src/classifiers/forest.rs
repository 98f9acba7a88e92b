use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::tree::{DecisionTree, TreeSettings};
use crate::classifiers::{check_training_data, TrainedModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_estimators: usize,
    pub min_samples_split: usize,
    pub max_depth: usize,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub width: usize,
    pub seed: u64,
}

impl ForestModel {
    pub fn vote_fraction(&self, x: ArrayView1<f64>) -> f64 {
        let votes = self.trees.iter().filter(|t| t.votes_positive(x)).count();
        votes as f64 / self.trees.len() as f64
    }

    /// The first `n` trees; a forest grown with more trees from the same
    /// seed starts with exactly these.
    pub fn truncated(&self, n: usize) -> ForestModel {
        ForestModel {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            width: self.width,
            seed: self.seed,
        }
    }
}

/// splitmix64 finaliser over the pair.
pub(crate) fn mix(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bagged CART trees. Tree `i` depends only on `(seed, i)`, so the result
/// does not depend on thread scheduling.
pub fn train_rf(x: &Array2<f64>, y: &[f64], p: &RfParams, seed: u64) -> Result<TrainedModel> {
    check_training_data(x, y)?;
    if p.n_estimators == 0 || p.max_depth == 0 || p.min_samples_split < 2 {
        return Err(Error::invalid(format!(
            "RF needs n_estimators, max_depth >= 1 and min_samples_split >= 2, got {p:?}"
        )));
    }
    let (n, d) = x.dim();
    let settings = TreeSettings {
        max_depth: p.max_depth,
        min_samples_split: p.min_samples_split,
        max_features: ((d as f64).sqrt().floor() as usize).max(1),
        criterion: p.criterion,
    };
    let trees = (0..p.n_estimators as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(seed, i));
            let samples: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            DecisionTree::grow(x, y, samples, &settings, &mut rng)
        })
        .collect();
    Ok(TrainedModel::Forest(ForestModel { trees, width: d, seed }))
}
