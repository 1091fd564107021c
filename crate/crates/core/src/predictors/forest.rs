//! Bagged CART forest with Gini splits on random feature subsets.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{Rng, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: 8,
            seed: 0,
        }
    }
}

/// Flat tree node; children are indices into the owning tree's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGold {
    pub dim: usize,
    pub max_depth: usize,
    pub trees: Vec<Vec<TreeNode>>,
}

impl ForestGold {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    fn tree_proba(nodes: &[TreeNode], x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match nodes[at] {
                TreeNode::Leaf { positive_fraction } => return positive_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

impl Classifier for ForestGold {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn proba(&self, x: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| Self::tree_proba(t, x)).sum();
        s / self.trees.len() as f64
    }
}

pub fn train_forest(train: &Dataset, cfg: &ForestConfig) -> Result<ForestGold> {
    let labels = train.labels()?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Invalid("forest training needs both classes present".into()));
    }
    if cfg.tree_count == 0 {
        return Err(Error::Invalid("tree_count must be positive".into()));
    }
    let dim = train.dim();
    let max_features = ((dim as f64).sqrt().round() as usize).clamp(1, dim);
    let seeds = SeedStream::new(cfg.seed);
    let builder = TreeBuilder {
        rows: &train.rows,
        labels,
        max_depth: cfg.max_depth,
        max_features,
    };
    let trees = (0..cfg.tree_count)
        .map(|t| {
            let mut rng = seeds.rng(&format!("tree-{t}"));
            let n = train.len();
            let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut nodes = Vec::new();
            builder.grow(boot, 0, &mut nodes, &mut rng);
            nodes
        })
        .collect();
    Ok(ForestGold {
        dim,
        max_depth: cfg.max_depth,
        trees,
    })
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [u8],
    max_depth: usize,
    max_features: usize,
}

impl TreeBuilder<'_> {
    /// Appends the subtree for `idx` and returns its root index.
    fn grow(&self, mut idx: Vec<usize>, depth: usize, nodes: &mut Vec<TreeNode>, rng: &mut Rng) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let frac = pos as f64 / idx.len() as f64;
        let here = nodes.len();
        nodes.push(TreeNode::Leaf {
            positive_fraction: frac,
        });
        if depth >= self.max_depth || pos == 0 || pos == idx.len() || idx.len() < 2 {
            return here;
        }
        let Some((feature, threshold)) = self.best_split(&mut idx, pos, rng) else {
            return here;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, nodes, rng);
        let right = self.grow(r, depth + 1, nodes, rng);
        nodes[here] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        here
    }

    /// Lowest weighted Gini over a random feature subset; `None` if no
    /// candidate separates the node.
    fn best_split(&self, idx: &mut [usize], pos: usize, rng: &mut Rng) -> Option<(usize, f64)> {
        let dim = self.rows[idx[0]].len();
        let n = idx.len() as f64;
        let total_pos = pos as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut features = sample(rng, dim, self.max_features).into_vec();
        features.sort_unstable();
        for f in features {
            idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left_pos = 0.0;
            for k in 0..idx.len() - 1 {
                left_pos += f64::from(self.labels[idx[k]]);
                let (v, next) = (self.rows[idx[k]][f], self.rows[idx[k + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_pos = total_pos - left_pos;
                let gini_l = 1.0 - (left_pos / nl).powi(2) - (1.0 - left_pos / nl).powi(2);
                let gini_r = 1.0 - (right_pos / nr).powi(2) - (1.0 - right_pos / nr).powi(2);
                let score = (nl * gini_l + nr * gini_r) / n;
                if best.is_none_or(|(s, _, _)| score < s - 1e-12) {
                    best = Some((score, f, 0.5 * (v + next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Feature, FeatureSchema};
    use crate::predictors::accuracy;
    use crate::rng::rng_from_seed;

    fn stump_data(n: usize) -> Dataset {
        let s = FeatureSchema::new(
            vec![Feature::continuous("a", true), Feature::continuous("b", true)],
            "1",
        )
        .unwrap();
        let mut rng = rng_from_seed(0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let labels = rows.iter().map(|r| u8::from(r[0] >= 0.5)).collect();
        Dataset::new(s, rows, Some(labels)).unwrap()
    }

    #[test]
    fn separable_by_one_stump() {
        let d = stump_data(300);
        let f = train_forest(&d, &ForestConfig::default()).unwrap();
        assert_eq!(accuracy(&f, &d.rows, d.labels().unwrap()).unwrap(), 1.0);
        assert_eq!(f.tree_count(), 100);
    }

    #[test]
    fn probabilities_in_unit_interval() {
        let d = stump_data(200);
        let f = train_forest(
            &d,
            &ForestConfig {
                tree_count: 10,
                ..Default::default()
            },
        )
        .unwrap();
        for x in [[-5.0, 3.0], [0.5, 0.5], [9.0, -9.0]] {
            let p = f.predict_proba(&x).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(f.predict_proba(&[0.1]).is_err());
    }

    #[test]
    fn unanimous_leaf_gives_one() {
        let f = ForestGold {
            dim: 1,
            max_depth: 0,
            trees: vec![vec![TreeNode::Leaf { positive_fraction: 1.0 }]],
        };
        assert_eq!(f.predict_proba(&[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let d = stump_data(50);
        let d = d.with_labels(vec![1; 50]).unwrap();
        assert!(train_forest(&d, &ForestConfig::default()).is_err());
    }

    #[test]
    fn deterministic_and_tree_invariants() {
        let d = stump_data(150);
        let cfg = ForestConfig {
            tree_count: 5,
            max_depth: 4,
            seed: 9,
        };
        let a = train_forest(&d, &cfg).unwrap();
        assert_eq!(a, train_forest(&d, &cfg).unwrap());
        for t in &a.trees {
            for n in t {
                match *n {
                    TreeNode::Leaf { positive_fraction } => {
                        assert!((0.0..=1.0).contains(&positive_fraction))
                    }
                    TreeNode::Split { left, right, .. } => {
                        assert!(left < t.len() && right < t.len())
                    }
                }
            }
        }
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<ForestGold>(&json).unwrap(), a);
    }
}
