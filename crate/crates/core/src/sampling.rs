//! Autoregressive forward sampling of recourse candidates and best-of-N
//! selection by the classifier.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::softmax_in_place;
use crate::data::{argmax_first, FeatureSchema};
use crate::error::{Error, Result};
use crate::model::RecourseModel;
use crate::pairing::l1;
use crate::predictors::Classifier;
use crate::rng::{rng_from_seed, Rng};

/// Rows decoded per forward pass.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Multiplier on the head log-probabilities before bin selection.
    pub tau: f64,
    /// Gaussian jitter added to the chosen bin center.
    pub sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            tau: 10.0,
            sigma: 0.0,
            n_samples: 10,
            seed: 0,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.sigma >= 0.0) || self.n_samples == 0 {
            return Err(Error::Invalid(format!(
                "need τ > 0, σ ≥ 0, n_samples ≥ 1 (got {}, {}, {})",
                self.tau, self.sigma, self.n_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseCandidate {
    pub x: Vec<f64>,
    pub h_score: f64,
    pub cost: f64,
    pub sample_index: usize,
}

/// All draws for one query plus the index of the best one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recourse {
    pub best: usize,
    pub candidates: Vec<RecourseCandidate>,
}

impl Recourse {
    pub fn best(&self) -> &RecourseCandidate {
        &self.candidates[self.best]
    }
}

/// Sets the argmax of each one-hot group to 1 and the rest to 0
/// (ties to the lowest index).
pub fn project_categoricals(x: &mut [f64], schema: &FeatureSchema) {
    for g in schema.categorical_groups() {
        let k = argmax_first(&x[g.clone()]);
        for (i, v) in x[g].iter_mut().enumerate() {
            *v = if i == k { 1.0 } else { 0.0 };
        }
    }
}

/// One draw per query row. Immutable coordinates are pinned to the query's
/// values as soon as they are decoded, so later features condition on them.
pub fn sample_rows(
    model: &RecourseModel,
    queries: &[Vec<f64>],
    immutable: &[bool],
    cfg: &SampleConfig,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let d = model.dim();
    if immutable.len() != d {
        return Err(Error::shape(
            "sample",
            format!("mask of {} for {d} features", immutable.len()),
        ));
    }
    let mut out = Vec::with_capacity(queries.len());
    for chunk in queries.chunks(CHUNK) {
        let memory = model.encode(chunk)?;
        let mut rows = vec![vec![0.0; d]; chunk.len()];
        for j in 0..d {
            let grid = &model.grid().features[j];
            let logp = model.feature_log_probs(memory.as_ref(), &rows, j)?;
            for ((row, lp), query) in rows.iter_mut().zip(logp).zip(chunk) {
                let mut w: Vec<f64> = lp.iter().map(|l| cfg.tau * l).collect();
                softmax_in_place(&mut w);
                let k = draw(&w, rng);
                let mut v = grid.centers[k];
                if cfg.sigma > 0.0 {
                    let e: f64 = rng.sample(StandardNormal);
                    v = (v + cfg.sigma * e).clamp(0.0, 1.0);
                }
                row[j] = if immutable[j] { query[j] } else { v };
            }
        }
        for (row, query) in rows.iter_mut().zip(chunk) {
            project_categoricals(row, model.schema());
            for j in (0..d).filter(|&j| immutable[j]) {
                row[j] = query[j];
            }
        }
        out.extend(rows);
    }
    Ok(out)
}

fn draw(weights: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// Single draw for `x` with the schema's immutables.
pub fn sample_one(x: &[f64], model: &RecourseModel, cfg: &SampleConfig) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(cfg.seed);
    let mask = model.schema().immutable_mask();
    Ok(sample_rows(model, &[x.to_vec()], &mask, cfg, &mut rng)?.remove(0))
}

/// `n_samples` draws for each query, scored by `h`; best = highest score
/// (ties to the lowest sample index).
pub fn sample_recourse_batch(
    queries: &[Vec<f64>],
    model: &RecourseModel,
    h: &dyn Classifier,
    immutable: &[bool],
    cfg: &SampleConfig,
) -> Result<Vec<Recourse>> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let expanded: Vec<Vec<f64>> = queries.iter().flat_map(|q| std::iter::repeat_n(q.clone(), n)).collect();
    let mut rng = rng_from_seed(cfg.seed);
    let drawn = sample_rows(model, &expanded, immutable, cfg, &mut rng)?;
    let scores = h.predict_proba_batch(&drawn)?;
    let mut drawn = drawn.into_iter();
    Ok(queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let candidates: Vec<RecourseCandidate> = (0..n)
                .map(|s| {
                    let x = drawn.next().expect("one row per draw");
                    RecourseCandidate {
                        cost: l1(q, &x),
                        h_score: scores[qi * n + s],
                        x,
                        sample_index: s,
                    }
                })
                .collect();
            let mut best = 0;
            for (i, c) in candidates.iter().enumerate() {
                if c.h_score > candidates[best].h_score {
                    best = i;
                }
            }
            Recourse { best, candidates }
        })
        .collect())
}

pub fn sample_recourse(x: &[f64], model: &RecourseModel, h: &dyn Classifier, cfg: &SampleConfig) -> Result<Recourse> {
    let mask = model.schema().immutable_mask();
    Ok(sample_recourse_batch(&[x.to_vec()], model, h, &mask, cfg)?.remove(0))
}

/// Mean per-feature entropy of the temperature-scaled bin distributions
/// along sampled trajectories for `query`.
pub fn mean_bin_entropy(model: &RecourseModel, query: &[f64], tau: f64, passes: usize, seed: u64) -> Result<f64> {
    let cfg = SampleConfig {
        tau,
        ..SampleConfig::default()
    };
    let mut rng = rng_from_seed(seed);
    let queries = vec![query.to_vec(); passes];
    let mask = vec![false; model.dim()];
    let rows = sample_rows(model, &queries, &mask, &cfg, &mut rng)?;
    let memory = model.encode(&queries)?;
    let mut total = 0.0;
    for j in 0..model.dim() {
        for lp in model.feature_log_probs(memory.as_ref(), &rows, j)? {
            let mut w: Vec<f64> = lp.iter().map(|l| tau * l).collect();
            softmax_in_place(&mut w);
            total -= w.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        }
    }
    Ok(total / (passes * model.dim()) as f64)
}
