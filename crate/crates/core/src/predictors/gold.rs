//! Closed-form decision boundaries for the synthetic datasets.

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::autodiff::sigmoid;
use crate::data::{Preprocessor, ToyKind};

/// Ground-truth classifier evaluated in raw (pre-normalization) space.
///
/// Moons and circles are hard 0/1 boundaries (nearest arc, radius midway
/// between the rings); corr is the exact Gaussian posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticGold {
    pub kind: ToyKind,
    pub preprocessor: Preprocessor,
}

impl AnalyticGold {
    pub fn new(kind: ToyKind, preprocessor: Preprocessor) -> Self {
        Self { kind, preprocessor }
    }

    fn raw(&self, x: &[f64]) -> [f64; 2] {
        let a = self.preprocessor.denormalize(0, x[0]).unwrap_or(x[0]);
        let b = self.preprocessor.denormalize(1, x[1]).unwrap_or(x[1]);
        [a, b]
    }

    /// Positive-class probability at a raw-space point.
    pub fn proba_raw(&self, p: [f64; 2]) -> f64 {
        match &self.kind {
            ToyKind::Moons { .. } => {
                let upper = arc_distance(p, [0.0, 0.0], true);
                let lower = arc_distance(p, [1.0, 0.5], false);
                if lower < upper {
                    1.0
                } else {
                    0.0
                }
            }
            ToyKind::Circles { factor, .. } => {
                if p[0].hypot(p[1]) < 0.5 * (1.0 + factor) {
                    1.0
                } else {
                    0.0
                }
            }
            ToyKind::Corr(c) => {
                // equal priors, shared covariance [[1, ρ], [ρ, 1]]
                let det = 1.0 - c.rho * c.rho;
                let m = c.mean(1);
                let w = [(m[0] - c.rho * m[1]) / det, (m[1] - c.rho * m[0]) / det];
                let bias = -0.5 * (w[0] * m[0] + w[1] * m[1]);
                sigmoid(w[0] * p[0] + w[1] * p[1] + bias)
            }
        }
    }
}

/// Distance from `p` to a unit half circle around `center` (upper or lower half).
fn arc_distance(p: [f64; 2], center: [f64; 2], upper: bool) -> f64 {
    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
    let on_side = if upper { dy >= 0.0 } else { dy <= 0.0 };
    if on_side {
        (dx.hypot(dy) - 1.0).abs()
    } else {
        (dx - 1.0).hypot(dy).min((dx + 1.0).hypot(dy))
    }
}

impl Classifier for AnalyticGold {
    fn input_dim(&self) -> usize {
        2
    }

    fn proba(&self, x: &[f64]) -> f64 {
        self.proba_raw(self.raw(x))
    }
}
