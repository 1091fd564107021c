//! End-to-end experiment wiring shared by the CLI and the integration
//! tests: data, gold, classifier, LOF reference, evaluation set, and one
//! runner per recourse method.

use serde::{Deserialize, Serialize};

use crate::baselines::{wachter, Nnr, NnrVariant, WachterConfig, WachterResult};
use crate::data::{gen_circles, gen_corr, gen_moons, split, CorrParams, DataBundle, Dataset, ToyKind};
use crate::error::{Error, Result};
use crate::evalkit::{evaluate, LofConfig, LofModel, MethodMetrics};
use crate::model::{fit_unconditional, train, RecourseModel, TrainConfig, TrainSummary};
use crate::pairing::partition;
use crate::predictors::{
    predicted_labels, sample_labels, train_forest, train_mlp, AnalyticGold, Classifier, ForestConfig, Gold,
    MlpClassifier, MlpConfig,
};
use crate::rng::SeedStream;
use crate::sampling::{sample_recourse_batch, Recourse, SampleConfig};

pub const DEFAULT_EVAL_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub kind: ToyKind,
    pub n: usize,
    pub test_fraction: f64,
}

impl ToySpec {
    pub fn moons() -> Self {
        Self {
            kind: ToyKind::Moons { noise: 0.1 },
            n: 2000,
            test_fraction: 0.25,
        }
    }

    pub fn circles() -> Self {
        Self {
            kind: ToyKind::Circles {
                noise: 0.05,
                factor: 0.5,
            },
            n: 2000,
            test_fraction: 0.25,
        }
    }

    pub fn corr() -> Self {
        Self {
            kind: ToyKind::Corr(CorrParams::default()),
            n: 2000,
            test_fraction: 0.25,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "moons" => Some(Self::moons()),
            "circles" => Some(Self::circles()),
            "corr" => Some(Self::corr()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ToyKind::Moons { .. } => "moons",
            ToyKind::Circles { .. } => "circles",
            ToyKind::Corr(_) => "corr",
        }
    }

    /// Generates and splits, keeping the generator's labels.
    pub fn bundle(&self, seed: u64) -> Result<DataBundle> {
        let seeds = SeedStream::new(seed);
        let data = match self.kind {
            ToyKind::Moons { noise } => gen_moons(self.n, noise, seeds.seed("data"))?,
            ToyKind::Circles { noise, factor } => gen_circles(self.n, noise, factor, seeds.seed("data"))?,
            ToyKind::Corr(p) => gen_corr(self.n, p, seeds.seed("data"))?,
        };
        let (train, test) = split(&data.dataset, self.test_fraction, seeds.seed("split"))?;
        Ok(DataBundle {
            name: self.name().to_string(),
            preprocessor: data.preprocessor,
            train,
            test,
            toy: Some(self.kind),
        })
    }
}

/// Analytic gold for toys, otherwise a forest fitted on the observed labels.
pub fn build_gold(bundle: &DataBundle, forest: &ForestConfig, seed: u64) -> Result<Gold> {
    Ok(match bundle.toy {
        Some(kind) => Gold::Analytic(AnalyticGold::new(kind, bundle.preprocessor.clone())),
        None => Gold::Forest(train_forest(
            &bundle.train,
            &ForestConfig {
                seed: SeedStream::new(seed).seed("gold"),
                ..*forest
            },
        )?),
    })
}

/// Replaces both splits' labels with draws from the gold.
pub fn relabel(bundle: &mut DataBundle, gold: &dyn Classifier, seed: u64) -> Result<()> {
    let seeds = SeedStream::new(seed);
    let train_labels = sample_labels(gold, &bundle.train.rows, seeds.seed("labels-train"))?;
    let test_labels = sample_labels(gold, &bundle.test.rows, seeds.seed("labels-test"))?;
    bundle.train = bundle.train.with_labels(train_labels)?;
    bundle.test = bundle.test.with_labels(test_labels)?;
    Ok(())
}

/// [`build_gold`] then [`relabel`] with the same seed.
pub fn fit_gold(bundle: &mut DataBundle, forest: &ForestConfig, seed: u64) -> Result<Gold> {
    let gold = build_gold(bundle, forest, seed)?;
    relabel(bundle, &gold, seed)?;
    Ok(gold)
}

/// Reference set for plausibility: train ∪ test with gold-predicted labels.
pub fn fit_lof(bundle: &DataBundle, gold: &dyn Classifier, cfg: &LofConfig) -> Result<LofModel> {
    let all = bundle.train.concat(&bundle.test);
    let labels = predicted_labels(gold, &all.rows)?;
    LofModel::fit(&all.rows, &labels, cfg)
}

/// First `m` test rows that `h` labels unfavorable.
pub fn eval_queries(test: &Dataset, h: &dyn Classifier, m: usize) -> Result<Vec<Vec<f64>>> {
    let p = h.predict_proba_batch(&test.rows)?;
    let q: Vec<Vec<f64>> = test
        .rows
        .iter()
        .zip(p)
        .filter(|(_, s)| *s < 0.5)
        .map(|(r, _)| r.clone())
        .take(m)
        .collect();
    if q.is_empty() {
        return Err(Error::Invalid("no test instance is classified unfavorable".into()));
    }
    Ok(q)
}

/// Everything needed to run and score recourse methods on one dataset.
pub struct Experiment {
    pub bundle: DataBundle,
    pub gold: Gold,
    pub h: MlpClassifier,
    pub lof: LofModel,
    pub queries: Vec<Vec<f64>>,
    pub seeds: SeedStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
    pub lof: LofConfig,
    pub eval_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::default(),
            mlp: MlpConfig::default(),
            lof: LofConfig::default(),
            eval_size: DEFAULT_EVAL_SIZE,
        }
    }
}

impl Experiment {
    pub fn prepare(mut bundle: DataBundle, cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let seeds = SeedStream::new(seed);
        let gold = fit_gold(&mut bundle, &cfg.forest, seeds.seed("gold"))?;
        let h = train_mlp(
            &bundle.train,
            Some(&bundle.test),
            &MlpConfig {
                seed: seeds.seed("classifier"),
                ..cfg.mlp
            },
        )?;
        let lof = fit_lof(&bundle, &gold, &cfg.lof)?;
        let queries = eval_queries(&bundle.test, &h, cfg.eval_size)?;
        Ok(Self {
            bundle,
            gold,
            h,
            lof,
            queries,
            seeds,
        })
    }

    pub fn toy(spec: &ToySpec, cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        Self::prepare(spec.bundle(seed)?, cfg, seed)
    }

    pub fn dim(&self) -> usize {
        self.bundle.schema().encoded_dim()
    }

    pub fn score(&self, method: &str, outputs: &[Vec<f64>]) -> Result<MethodMetrics> {
        evaluate(method, &self.queries, outputs, &self.gold, &self.lof, self.dim())
    }

    pub fn train_generator(&self, cfg: &TrainConfig) -> Result<(RecourseModel, TrainSummary)> {
        train(&self.bundle.train, &self.h, cfg)
    }

    /// Marginal model of the same confident-positive pool.
    pub fn train_unconditional(&self, cfg: &TrainConfig) -> Result<RecourseModel> {
        let part = partition(&self.bundle.train, &self.h, cfg.gamma)?;
        let pool: Vec<Vec<f64>> = part.pool.iter().map(|&i| self.bundle.train.rows[i].clone()).collect();
        fit_unconditional(self.bundle.schema(), &pool, cfg)
    }

    /// Best-of-N draws for every query, scored.
    pub fn run_sampler(
        &self,
        name: &str,
        model: &RecourseModel,
        cfg: &SampleConfig,
    ) -> Result<(MethodMetrics, Vec<Recourse>)> {
        let mask = self.bundle.schema().immutable_mask();
        let rec = sample_recourse_batch(&self.queries, model, &self.h, &mask, cfg)?;
        let outputs: Vec<Vec<f64>> = rec.iter().map(|r| r.best().x.clone()).collect();
        Ok((self.score(name, &outputs)?, rec))
    }

    /// Queries without a feasible neighbor keep their own value (and so
    /// count as invalid).
    pub fn run_nnr(&self, variant: NnrVariant) -> Result<(MethodMetrics, Vec<Vec<f64>>)> {
        let nnr = Nnr::new(&self.bundle.train, &self.h, variant)?;
        let outputs: Vec<Vec<f64>> = self
            .queries
            .iter()
            .map(|q| nnr.query(q).unwrap_or_else(|_| q.clone()))
            .collect();
        Ok((self.score(variant.name(), &outputs)?, outputs))
    }

    pub fn run_wachter(&self, cfg: &WachterConfig) -> Result<(MethodMetrics, Vec<WachterResult>)> {
        let schema = self.bundle.schema();
        let results = self
            .queries
            .iter()
            .map(|q| wachter(q, &self.h, schema, cfg))
            .collect::<Result<Vec<_>>>()?;
        let outputs: Vec<Vec<f64>> = results.iter().map(|r| r.x.clone()).collect();
        Ok((self.score("Wachter", &outputs)?, results))
    }
}
