//! Classifiers: the gold labeler (bagged CART forest or a closed-form toy
//! boundary) and the small MLP used as the approximate classifier `h`.

mod forest;
mod gold;
mod mlp;

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestConfig, ForestGold, TreeNode};
pub use gold::AnalyticGold;
pub use mlp::{train_mlp, MlpClassifier, MlpConfig};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Binary probabilistic classifier over encoded rows.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    /// P(favorable | x) without a dimension check.
    fn proba(&self, x: &[f64]) -> f64;

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.proba(x))
    }

    fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }
}

/// Classifier exposing ∇ₓ log P(favorable | x).
pub trait Differentiable: Classifier {
    /// Probability and the input gradient of its logarithm.
    fn log_proba_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::shape(
            "predict_proba",
            format!("expected {expected} features, got {found}"),
        ));
    }
    Ok(())
}

/// The latent decision-maker used for labeling and for judging validity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gold", rename_all = "lowercase")]
pub enum Gold {
    Forest(ForestGold),
    Analytic(AnalyticGold),
}

impl Gold {
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Deterministic validity verdict.
    pub fn is_valid(&self, x: &[f64]) -> bool {
        self.proba(x) >= 0.5
    }
}

impl Classifier for Gold {
    fn input_dim(&self) -> usize {
        match self {
            Gold::Forest(f) => f.input_dim(),
            Gold::Analytic(a) => a.input_dim(),
        }
    }

    fn proba(&self, x: &[f64]) -> f64 {
        match self {
            Gold::Forest(f) => f.proba(x),
            Gold::Analytic(a) => a.proba(x),
        }
    }
}

/// Draws `y_i ~ Bernoulli(gold(x_i))` independently.
pub fn sample_labels(gold: &dyn Classifier, rows: &[Vec<f64>], seed: u64) -> Result<Vec<u8>> {
    let mut rng = rng_from_seed(seed);
    rows.iter()
        .map(|r| {
            let p = gold.predict_proba(r)?;
            let u: f64 = rng.random();
            Ok(u8::from(u < p))
        })
        .collect()
}

/// Hard labels `gold(x) ≥ 0.5`.
pub fn predicted_labels(model: &dyn Classifier, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    rows.iter()
        .map(|r| Ok(u8::from(model.predict_proba(r)? >= 0.5)))
        .collect()
}

pub fn accuracy(model: &dyn Classifier, rows: &[Vec<f64>], labels: &[u8]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(f64::NAN);
    }
    let pred = predicted_labels(model, rows)?;
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / rows.len() as f64)
}
