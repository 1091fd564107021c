//! The conditional recourse generator: bin grids, the transformer, the
//! soft-label cross-entropy objective, the training loop, exact
//! log-densities, checkpoints, and the unconditional (marginal) variant.

mod bins;
pub mod gradcheck;
mod net;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use bins::{fit_bins, BinGrid, Binning, FeatureBins, DEFAULT_BINS, DEGENERATE_WIDTH};
pub use net::NetConfig;

use crate::autodiff::{Adam, Bound, ParamStore, Tape, Tensor, TensorContainer, Var};
use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::pairing::{partition, sample_pair, CostFn, PairTable, Partition};
use crate::predictors::Classifier;
use crate::rng::SeedStream;
use net::Net;

pub const CHECKPOINT_FORMAT: &str = "recourse-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub top_k: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub n_bins: usize,
    #[serde(default)]
    pub binning: Binning,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: crate::pairing::DEFAULT_LAMBDA,
            gamma: crate::pairing::DEFAULT_GAMMA,
            top_k: crate::pairing::DEFAULT_TOP_K,
            lr: 1e-4,
            batch: 2048,
            epochs: 100,
            seed: 0,
            n_bins: DEFAULT_BINS,
            binning: Binning::EqualWidth,
            net: NetConfig::tabular(),
        }
    }
}

impl TrainConfig {
    /// Settings for the 2D datasets: a few hundred negatives need smaller
    /// batches and a larger step to get enough updates.
    pub fn toy() -> Self {
        Self {
            lr: 1e-3,
            batch: 64,
            epochs: 200,
            net: NetConfig::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("λ = {} must be positive", self.lambda)));
        }
        if self.batch == 0 || self.epochs == 0 || !(self.lr > 0.0) {
            return Err(Error::Invalid("batch, epochs and lr must be positive".into()));
        }
        self.net.validate()
    }
}

/// A trained (or freshly initialized) generator with its bin grid.
#[derive(Debug, Clone)]
pub struct RecourseModel {
    net: Net,
    params: ParamStore,
    grid: BinGrid,
    schema: FeatureSchema,
    config: TrainConfig,
    losses: Vec<f64>,
}

impl RecourseModel {
    /// Randomly initialized model over `grid`.
    pub fn new(schema: &FeatureSchema, grid: BinGrid, config: &TrainConfig, conditional: bool) -> Result<Self> {
        config.net.validate()?;
        if grid.dim() != schema.encoded_dim() {
            return Err(Error::shape(
                "model",
                format!("grid has {} features, schema {}", grid.dim(), schema.encoded_dim()),
            ));
        }
        let mut params = ParamStore::new();
        let mut rng = SeedStream::new(config.seed).rng("model-init");
        let bins = grid.features.iter().map(FeatureBins::len).collect();
        let net = Net::new(config.net, bins, conditional, &mut params, &mut rng)?;
        Ok(Self {
            net,
            params,
            grid,
            schema: schema.clone(),
            config: config.clone(),
            losses: Vec::new(),
        })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn dim(&self) -> usize {
        self.net.dim
    }

    pub fn is_conditional(&self) -> bool {
        self.net.conditional()
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn batch_tensor(&self, rows: &[Vec<f64>]) -> Result<Tensor> {
        let d = self.dim();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::shape("model", format!("expected {d} features, got {}", r.len())));
        }
        Tensor::new(vec![rows.len(), d], rows.concat())
    }

    /// Teacher-forced log-probabilities on `tape`: `[d, B, max_bins]`.
    pub(crate) fn forward(&self, t: &mut Tape, p: &Bound, queries: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Var> {
        let memory = if self.is_conditional() {
            self.net.encode(t, p, self.batch_tensor(queries)?)?
        } else {
            None
        };
        self.net.decode(t, p, memory, &self.batch_tensor(targets)?)
    }

    /// Mean soft-label cross-entropy of a batch, recorded on `tape`.
    pub fn loss_on_tape(&self, t: &mut Tape, p: &Bound, queries: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Var> {
        let logp = self.forward(t, p, queries, targets)?;
        let q = t.constant(self.soft_label_tensor(targets));
        let prod = t.mul(q, logp)?;
        let total = t.sum(prod);
        Ok(t.scale(total, -1.0 / targets.len() as f64))
    }

    /// Soft labels laid out like the head output, zero on padded bins.
    fn soft_label_tensor(&self, targets: &[Vec<f64>]) -> Tensor {
        let (d, b, nmax) = (self.dim(), targets.len(), self.net.max_bins());
        let mut q = Tensor::zeros(&[d, b, nmax]);
        let data = q.data_mut();
        for (i, row) in targets.iter().enumerate() {
            for (j, f) in self.grid.features.iter().enumerate() {
                let off = (j * b + i) * nmax;
                data[off..off + f.len()].copy_from_slice(&f.soft_label(row[j]));
            }
        }
        q
    }

    /// Mean cross-entropy objective without recording gradients.
    pub fn loss(&self, queries: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        let mut t = Tape::new();
        let p = self.params.bind_frozen(&mut t);
        let l = self.loss_on_tape(&mut t, &p, queries, targets)?;
        Ok(t.value(l).item())
    }

    /// Per-row, per-feature log-probabilities over that feature's bins.
    pub fn log_probs(&self, queries: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut t = Tape::new();
        let p = self.params.bind_frozen(&mut t);
        let out = self.forward(&mut t, &p, queries, targets)?;
        Ok(self.unpack(t.value(out), targets.len()))
    }

    fn unpack(&self, v: &Tensor, b: usize) -> Vec<Vec<Vec<f64>>> {
        let nmax = self.net.max_bins();
        (0..b)
            .map(|i| {
                self.grid
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        let off = (j * b + i) * nmax;
                        v.data()[off..off + f.len()].to_vec()
                    })
                    .collect()
            })
            .collect()
    }

    /// Encoder states for repeated autoregressive decoding.
    pub fn encode(&self, queries: &[Vec<f64>]) -> Result<Option<Tensor>> {
        if !self.is_conditional() {
            return Ok(None);
        }
        let mut t = Tape::new();
        let p = self.params.bind_frozen(&mut t);
        let m = self.net.encode(&mut t, &p, self.batch_tensor(queries)?)?;
        Ok(m.map(|v| t.value(v).clone()))
    }

    /// Log-probabilities over the bins of `feature` given encoder states and
    /// the target prefix (entries at or after `feature` are ignored).
    pub fn feature_log_probs(
        &self,
        memory: Option<&Tensor>,
        prefix: &[Vec<f64>],
        feature: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let mut t = Tape::new();
        let p = self.params.bind_frozen(&mut t);
        let mem = memory.map(|m| t.constant(m.clone()));
        let out = self.net.decode(&mut t, &p, mem, &self.batch_tensor(prefix)?)?;
        let (b, nmax) = (prefix.len(), self.net.max_bins());
        let n = self.grid.features[feature].len();
        let data = t.value(out).data();
        Ok((0..b)
            .map(|i| {
                let off = (feature * b + i) * nmax;
                data[off..off + n].to_vec()
            })
            .collect())
    }

    /// Exact log-density of `target` under the kernel-mixture model given `query`.
    pub fn log_density(&self, target: &[f64], query: &[f64]) -> Result<f64> {
        Ok(self.log_density_batch(&[target.to_vec()], &[query.to_vec()])?[0])
    }

    pub fn log_density_batch(&self, targets: &[Vec<f64>], queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        let lp = self.log_probs(queries, targets)?;
        Ok(lp
            .iter()
            .zip(targets)
            .map(|(per_feature, x)| {
                per_feature
                    .iter()
                    .zip(&self.grid.features)
                    .zip(x)
                    .map(|((logp, f), &v)| f.log_mixture_density(logp, v))
                    .sum()
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    /// Checkpoint serialization; identical models give identical bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            conditional: self.is_conditional(),
            schema_fingerprint: self.schema.fingerprint(),
            schema: self.schema.clone(),
            config: self.config.clone(),
            grid: self.grid.clone(),
            losses: self.losses.clone(),
            params: self.params.to_container(),
        };
        Ok(serde_json::to_vec(&ck)?)
    }

    /// Loads a checkpoint, checking it against `expected` when given.
    pub fn load(path: &Path, expected: Option<&FeatureSchema>) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, expected)
    }

    pub fn from_bytes(bytes: &[u8], expected: Option<&FeatureSchema>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let actual = ck.schema.fingerprint();
        if actual != ck.schema_fingerprint {
            return Err(Error::Fingerprint {
                expected: ck.schema_fingerprint,
                found: actual,
            });
        }
        if let Some(s) = expected {
            if s.fingerprint() != actual {
                return Err(Error::Fingerprint {
                    expected: s.fingerprint(),
                    found: actual,
                });
            }
        }
        ck.grid.validate()?;
        let mut model = RecourseModel::new(&ck.schema, ck.grid, &ck.config, ck.conditional)?;
        model.params.load_matching(&ParamStore::from_container(&ck.params)?)?;
        model.losses = ck.losses;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    conditional: bool,
    schema_fingerprint: String,
    schema: FeatureSchema,
    config: TrainConfig,
    grid: BinGrid,
    losses: Vec<f64>,
    params: TensorContainer,
}

/// Summary of the supervision a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub negatives: usize,
    pub pool: usize,
    pub skipped: usize,
    pub losses: Vec<f64>,
}

/// Trains the conditional generator: partition by `h`, pair negatives with
/// the pool, then minimize the soft-label objective, drawing fresh partners
/// every epoch.
pub fn train(train: &Dataset, h: &dyn Classifier, cfg: &TrainConfig) -> Result<(RecourseModel, TrainSummary)> {
    cfg.validate()?;
    let part = partition(train, h, cfg.gamma)?;
    train_with_partition(train, &part, cfg)
}

pub fn train_with_partition(
    train: &Dataset,
    part: &Partition,
    cfg: &TrainConfig,
) -> Result<(RecourseModel, TrainSummary)> {
    cfg.validate()?;
    let pool_rows: Vec<Vec<f64>> = part.pool.iter().map(|&i| train.rows[i].clone()).collect();
    let grid = fit_bins(&pool_rows, cfg.n_bins, cfg.binning)?;
    let table = PairTable::build(train, part, &CostFn::new(&train.schema), cfg.lambda, cfg.top_k)?;
    let mut model = RecourseModel::new(&train.schema, grid, cfg, true)?;
    let seeds = SeedStream::new(cfg.seed);
    let mut pair_rng = seeds.rng("pairs");
    let queries: Vec<&Vec<f64>> = table.negatives.iter().map(|&i| &train.rows[i]).collect();
    let losses = optimize(&mut model, queries.len(), cfg, &seeds, |batch| {
        let xs: Vec<Vec<f64>> = batch.iter().map(|&b| queries[b].clone()).collect();
        let ys = batch
            .iter()
            .map(|&b| pool_rows[sample_pair(&table.dists[b], &mut pair_rng)].clone())
            .collect();
        (xs, ys)
    })?;
    model.losses = losses.clone();
    Ok((
        model,
        TrainSummary {
            negatives: table.negatives.len(),
            pool: table.pool.len(),
            skipped: table.skipped.len(),
            losses,
        },
    ))
}

/// Decoder-only model of the pool's marginal distribution, with twice the
/// decoder depth of the conditional model.
pub fn fit_unconditional(schema: &FeatureSchema, pool: &[Vec<f64>], cfg: &TrainConfig) -> Result<RecourseModel> {
    cfg.validate()?;
    let grid = fit_bins(pool, cfg.n_bins, cfg.binning)?;
    let mut ucfg = cfg.clone();
    ucfg.net.dec_layers = 2 * cfg.net.dec_layers.max(cfg.net.enc_layers);
    let mut model = RecourseModel::new(schema, grid, &ucfg, false)?;
    let seeds = SeedStream::new(cfg.seed).child("unconditional");
    let losses = optimize(&mut model, pool.len(), &ucfg, &seeds, |batch| {
        let ys: Vec<Vec<f64>> = batch.iter().map(|&b| pool[b].clone()).collect();
        (ys.clone(), ys)
    })?;
    model.losses = losses;
    Ok(model)
}

/// Shared minibatch loop. `pairs` maps batch positions to (queries, targets).
fn optimize<F>(
    model: &mut RecourseModel,
    n: usize,
    cfg: &TrainConfig,
    seeds: &SeedStream,
    mut pairs: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>),
{
    let adam = Adam::new(cfg.lr);
    let mut state = adam.init(&model.params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = seeds.rng("shuffle");
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch).enumerate() {
            let (xs, ys) = pairs(chunk);
            let mut t = Tape::new();
            let p = model.params.bind(&mut t);
            let loss = model.loss_on_tape(&mut t, &p, &xs, &ys)?;
            let value = t.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {value} at epoch {epoch}, batch {bi}"
                )));
            }
            total += value * chunk.len() as f64;
            let mut grads = t.backward(loss)?;
            let g = model.params.gradients(&p, &mut grads);
            adam.step(&mut model.params, &g, &mut state)?;
        }
        let mean = total / n as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        losses.push(mean);
    }
    Ok(losses)
}

#[cfg(test)]
mod tests;
