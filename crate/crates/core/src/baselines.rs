//! Comparison methods: nearest-neighbor recourse over filtered training
//! rows, and gradient descent on cost minus weighted log-probability.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::pairing::CostFn;
use crate::predictors::{Classifier, Differentiable};
use crate::sampling::project_categoricals;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NnrVariant {
    /// Any row labeled favorable.
    Plain,
    /// Any row with h above γ.
    ConfidentH { gamma: f64 },
    /// Rows labeled favorable with h above γ.
    PoolConstrained { gamma: f64 },
}

impl NnrVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Plain => "NNR",
            Self::ConfidentH { .. } => "NNR(h>γ)",
            Self::PoolConstrained { .. } => "NNR(pool)",
        }
    }
}

/// Candidate set for one variant, searched by feasible ℓ1 cost.
#[derive(Debug, Clone)]
pub struct Nnr {
    candidates: Vec<Vec<f64>>,
    cost: CostFn,
}

impl Nnr {
    pub fn new(train: &Dataset, h: &dyn Classifier, variant: NnrVariant) -> Result<Self> {
        let labels = train.labels()?;
        let scores = h.predict_proba_batch(&train.rows)?;
        let keep = |i: usize| match variant {
            NnrVariant::Plain => labels[i] == 1,
            NnrVariant::ConfidentH { gamma } => scores[i] > gamma,
            NnrVariant::PoolConstrained { gamma } => labels[i] == 1 && scores[i] > gamma,
        };
        let candidates: Vec<Vec<f64>> = (0..train.len())
            .filter(|&i| keep(i))
            .map(|i| train.rows[i].clone())
            .collect();
        if candidates.is_empty() {
            return Err(Error::Invalid(format!("{} has no candidates", variant.name())));
        }
        Ok(Self {
            candidates,
            cost: CostFn::new(&train.schema),
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Cheapest feasible candidate; ties to the lowest index.
    pub fn query(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in self.candidates.iter().enumerate() {
            if let Some(v) = self.cost.cost(x, c) {
                if best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, i));
                }
            }
        }
        best.map(|(_, i)| self.candidates[i].clone())
            .ok_or_else(|| Error::AllInfeasible("no candidate shares the immutable features".into()))
    }
}

pub fn nnr(x: &[f64], train: &Dataset, h: &dyn Classifier, variant: NnrVariant) -> Result<Vec<f64>> {
    Nnr::new(train, h, variant)?.query(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WachterConfig {
    pub step: f64,
    pub max_iter: usize,
    /// Weight on −log h.
    pub weight: f64,
}

impl Default for WachterConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_iter: 1000,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WachterResult {
    pub x: Vec<f64>,
    pub h_score: f64,
    pub success: bool,
    pub iterations: usize,
}

/// Descent on ‖x′ − x‖₁ − w·log h(x′) over mutable coordinates with
/// Adam-scaled steps of size `step`, projected into [0,1], stopping once
/// h(x′) ≥ ½. One-hot groups are re-projected at the end.
pub fn wachter(
    x: &[f64],
    h: &dyn Differentiable,
    schema: &FeatureSchema,
    cfg: &WachterConfig,
) -> Result<WachterResult> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    if !(cfg.step > 0.0) {
        return Err(Error::Invalid("Wachter step size must be positive".into()));
    }
    h.predict_proba(x)?;
    let mutable: Vec<bool> = schema.immutable_mask().iter().map(|m| !m).collect();
    let mut cur = x.to_vec();
    let (mut m1, mut m2) = (vec![0.0; x.len()], vec![0.0; x.len()]);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let (p, g) = h.log_proba_grad(&cur);
        if p >= 0.5 {
            break;
        }
        iterations += 1;
        let (c1, c2) = (1.0 - BETA1.powi(iterations as i32), 1.0 - BETA2.powi(iterations as i32));
        for j in (0..cur.len()).filter(|&j| mutable[j]) {
            let d = cur[j] - x[j];
            let sub = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            let grad = sub - cfg.weight * g[j];
            m1[j] = BETA1 * m1[j] + (1.0 - BETA1) * grad;
            m2[j] = BETA2 * m2[j] + (1.0 - BETA2) * grad * grad;
            let delta = cfg.step * (m1[j] / c1) / ((m2[j] / c2).sqrt() + EPS);
            cur[j] = (cur[j] - delta).clamp(0.0, 1.0);
        }
    }
    project_categoricals(&mut cur, schema);
    let h_score = h.proba(&cur);
    Ok(WachterResult {
        x: cur,
        h_score,
        success: h_score >= 0.5,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::sigmoid;
    use crate::data::Feature;

    struct Ramp;

    impl Classifier for Ramp {
        fn input_dim(&self) -> usize {
            2
        }
        fn proba(&self, x: &[f64]) -> f64 {
            sigmoid(10.0 * (x[0] - 0.5))
        }
    }

    impl Differentiable for Ramp {
        fn log_proba_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
            let p = self.proba(x);
            (p, vec![10.0 * (1.0 - p), 0.0])
        }
    }

    fn schema(second_mutable: bool) -> FeatureSchema {
        FeatureSchema::new(
            vec![Feature::continuous("a", true), Feature::continuous("b", second_mutable)],
            "1",
        )
        .unwrap()
    }

    fn train() -> Dataset {
        let rows = vec![
            vec![0.9, 0.5],
            vec![0.6, 0.5],
            vec![0.7, 0.1],
            vec![0.3, 0.5],
            vec![0.55, 0.5],
        ];
        Dataset::new(schema(false), rows, Some(vec![1, 1, 1, 0, 0])).unwrap()
    }

    #[test]
    fn nnr_variants() {
        let d = train();
        let x = [0.4, 0.5];
        assert_eq!(nnr(&x, &d, &Ramp, NnrVariant::Plain).unwrap(), vec![0.6, 0.5]);
        // h(0.55) ≈ 0.62 > 0.6 but that row is labeled 0.
        let conf = NnrVariant::ConfidentH { gamma: 0.6 };
        assert_eq!(nnr(&x, &d, &Ramp, conf).unwrap(), vec![0.55, 0.5]);
        let pool = NnrVariant::PoolConstrained { gamma: 0.6 };
        assert_eq!(nnr(&x, &d, &Ramp, pool).unwrap(), vec![0.6, 0.5]);
        let strict = NnrVariant::PoolConstrained { gamma: 0.9 };
        assert_eq!(nnr(&x, &d, &Ramp, strict).unwrap(), vec![0.9, 0.5]);
        // immutable b = 0.1 leaves one feasible row
        assert_eq!(nnr(&[0.0, 0.1], &d, &Ramp, NnrVariant::Plain).unwrap(), vec![0.7, 0.1]);
        assert!(nnr(&[0.0, 0.2], &d, &Ramp, NnrVariant::Plain).is_err());
    }

    #[test]
    fn nnr_picks_cheapest() {
        let rows = vec![vec![0.5, 0.0], vec![0.2, 0.0], vec![0.9, 0.0]];
        let d = Dataset::new(schema(true), rows, Some(vec![1, 1, 1])).unwrap();
        assert_eq!(nnr(&[0.0, 0.0], &d, &Ramp, NnrVariant::Plain).unwrap(), vec![0.2, 0.0]);
    }

    #[test]
    fn wachter_reaches_boundary() {
        let r = wachter(&[0.2, 0.3], &Ramp, &schema(true), &WachterConfig::default()).unwrap();
        assert!(r.success && r.h_score >= 0.5);
        assert!((r.x[0] - 0.5).abs() < 0.05, "{:?}", r.x);
        assert_eq!(r.x[1], 0.3);
    }

    #[test]
    fn wachter_keeps_positive_and_immutables() {
        let r = wachter(&[0.8, 0.3], &Ramp, &schema(true), &WachterConfig::default()).unwrap();
        assert_eq!((r.x, r.iterations), (vec![0.8, 0.3], 0));
        let r = wachter(&[0.1, 0.3], &Ramp, &schema(false), &WachterConfig::default()).unwrap();
        assert_eq!(r.x[1], 0.3);
        assert!(wachter(
            &[0.1, 0.3],
            &Ramp,
            &schema(true),
            &WachterConfig {
                step: 0.0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn wachter_reports_failure() {
        let cfg = WachterConfig {
            max_iter: 3,
            ..Default::default()
        };
        let r = wachter(&[0.0, 0.3], &Ramp, &schema(true), &cfg).unwrap();
        assert!(!r.success && r.iterations == 3);
    }
}
