//! Fully connected ReLU network with a sigmoid output, trained with BCE.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{accuracy, Classifier, Differentiable};
use crate::autodiff::{sigmoid, Adam, ParamId, ParamStore, Tape, Tensor, TensorContainer, Var};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub const HIDDEN: [usize; 3] = [10, 10, 10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Independent initializations; the lowest final training loss wins.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    3
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 100,
            batch: 64,
            seed: 0,
            restarts: default_restarts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub widths: Vec<usize>,
    pub params: TensorContainer,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
    #[serde(skip)]
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl MlpClassifier {
    /// Network with every weight and bias set to zero.
    pub fn zeros(dim: usize) -> Self {
        let store = init_store(dim, None);
        Self::from_store(&store)
    }

    fn from_store(store: &ParamStore) -> Self {
        let widths = widths_of(store);
        let mut m = Self {
            widths,
            params: store.to_container(),
            train_accuracy: f64::NAN,
            test_accuracy: None,
            losses: Vec::new(),
            layers: Vec::new(),
        };
        m.rebuild_cache();
        m
    }

    fn rebuild_cache(&mut self) {
        self.layers = self
            .params
            .tensors
            .chunks(2)
            .map(|wb| (wb[0].values.clone(), wb[1].values.clone()))
            .collect();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut m: MlpClassifier = serde_json::from_slice(&bytes)?;
        let store = ParamStore::from_container(&m.params)?;
        if widths_of(&store) != m.widths {
            return Err(Error::Invalid("classifier widths disagree with tensors".into()));
        }
        m.rebuild_cache();
        Ok(m)
    }

    fn logit(&self, x: &[f64]) -> f64 {
        let mut act = center(x);
        let last = self.layers.len() - 1;
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let out = b.len();
            let mut next = b.clone();
            for (i, &a) in act.iter().enumerate() {
                let row = &w[i * out..(i + 1) * out];
                for (n, &wv) in next.iter_mut().zip(row) {
                    *n += a * wv;
                }
            }
            if l != last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            act = next;
        }
        act[0]
    }

    /// Logit and its gradient with respect to the input.
    pub fn logit_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut act = center(x);
        let mut masks: Vec<Vec<bool>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let out = b.len();
            let mut next = b.clone();
            for (i, &a) in act.iter().enumerate() {
                for (n, &wv) in next.iter_mut().zip(&w[i * out..(i + 1) * out]) {
                    *n += a * wv;
                }
            }
            if l != last {
                masks.push(next.iter().map(|&v| v > 0.0).collect());
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            act = next;
        }
        let mut grad = vec![1.0];
        for (l, (w, b)) in self.layers.iter().enumerate().rev() {
            let out = b.len();
            if l != last {
                for (g, &on) in grad.iter_mut().zip(&masks[l]) {
                    if !on {
                        *g = 0.0;
                    }
                }
            }
            let inputs = w.len() / out;
            grad = (0..inputs)
                .map(|i| w[i * out..(i + 1) * out].iter().zip(&grad).map(|(a, g)| a * g).sum())
                .collect();
        }
        (act[0], grad.into_iter().map(|g| 2.0 * g).collect())
    }
}

impl Differentiable for MlpClassifier {
    fn log_proba_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (z, g) = self.logit_grad(x);
        let p = sigmoid(z);
        (p, g.into_iter().map(|v| (1.0 - p) * v).collect())
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

/// Maps encoded [0,1] inputs to [−1,1]. Zero-centered inputs keep the
/// narrow ReLU stack out of the near-linear plateau it otherwise settles in.
fn center(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 2.0 * v - 1.0).collect()
}

fn widths_of(store: &ParamStore) -> Vec<usize> {
    let mut w: Vec<usize> = store.tensors().iter().step_by(2).map(|t| t.shape()[0]).collect();
    w.push(1);
    w
}

fn init_store(dim: usize, seeds: Option<&SeedStream>) -> ParamStore {
    let mut widths = vec![dim];
    widths.extend(HIDDEN);
    widths.push(1);
    let mut store = ParamStore::new();
    let mut rng = seeds.map(|s| s.rng("mlp-init"));
    // Weights and biases uniform in ±1/√fan_in; random biases keep
    // hidden units alive on non-negative inputs.
    for (l, pair) in widths.windows(2).enumerate() {
        let shape = [pair[0], pair[1]];
        let a = 1.0 / (pair[0] as f64).sqrt();
        match rng.as_mut() {
            Some(r) => {
                store.add_uniform(&format!("w{l}"), &shape, a, r);
                store.add_uniform(&format!("b{l}"), &[pair[1]], a, r);
            }
            None => {
                store.add_zeros(&format!("w{l}"), &shape);
                store.add_zeros(&format!("b{l}"), &[pair[1]]);
            }
        }
    }
    store
}

/// Mean binary cross-entropy of the network on a batch.
fn batch_loss(tape: &mut Tape, params: &[Var], x: Tensor, y: Tensor) -> Result<Var> {
    let mut h = tape.constant(x);
    let layers = params.len() / 2;
    for l in 0..layers {
        h = tape.matmul(h, params[2 * l])?;
        h = tape.add(h, params[2 * l + 1])?;
        if l + 1 != layers {
            h = tape.relu(h);
        }
    }
    let ones = tape.constant(Tensor::filled(y.shape(), 1.0));
    let y = tape.constant(y);
    let not_y = tape.sub(ones, y)?;
    let p = tape.sigmoid(h);
    let neg = tape.scale(h, -1.0);
    let q = tape.sigmoid(neg);
    let log_p = tape.log(p);
    let log_q = tape.log(q);
    let a = tape.mul(y, log_p)?;
    let b = tape.mul(not_y, log_q)?;
    let ll = tape.add(a, b)?;
    let m = tape.mean(ll);
    Ok(tape.scale(m, -1.0))
}

/// Adam on BCE; records train (and optionally test) accuracy.
pub fn train_mlp(train: &Dataset, test: Option<&Dataset>, cfg: &MlpConfig) -> Result<MlpClassifier> {
    let labels = train.labels()?;
    if train.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let root = SeedStream::new(cfg.seed);
    let mut best: Option<(ParamStore, Vec<f64>)> = None;
    for r in 0..cfg.restarts.max(1) {
        let seeds = if r == 0 {
            root
        } else {
            root.child(&format!("restart-{r}"))
        };
        let (store, losses) = fit_once(train, labels, cfg, &seeds)?;
        let last = |l: &[f64]| l.last().copied().unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(_, b)| last(&losses) < last(b)) {
            best = Some((store, losses));
        }
    }
    let (store, losses) = best.expect("at least one restart");
    let mut model = MlpClassifier::from_store(&store);
    model.losses = losses;
    model.train_accuracy = accuracy(&model, &train.rows, labels)?;
    model.test_accuracy = match test {
        Some(t) => Some(accuracy(&model, &t.rows, t.labels()?)?),
        None => None,
    };
    Ok(model)
}

fn fit_once(train: &Dataset, labels: &[u8], cfg: &MlpConfig, seeds: &SeedStream) -> Result<(ParamStore, Vec<f64>)> {
    let dim = train.dim();
    let mut store = init_store(dim, Some(seeds));
    let adam = Adam::new(cfg.lr);
    let mut state = adam.init(&store);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = seeds.rng("mlp-shuffle");
    let mut losses = Vec::with_capacity(cfg.epochs);
    let ids: Vec<ParamId> = store.ids().collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let x: Vec<f64> = chunk.iter().flat_map(|&i| center(&train.rows[i])).collect();
            let y: Vec<f64> = chunk.iter().map(|&i| f64::from(labels[i])).collect();
            let mut tape = Tape::new();
            let bound = store.bind(&mut tape);
            let vars: Vec<Var> = ids.iter().map(|&id| bound[id]).collect();
            let loss = batch_loss(
                &mut tape,
                &vars,
                Tensor::new(vec![chunk.len(), dim], x)?,
                Tensor::new(vec![chunk.len(), 1], y)?,
            )?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("classifier loss at epoch {epoch}")));
            }
            total += value * chunk.len() as f64;
            let mut grads = tape.backward(loss)?;
            let g = store.gradients(&bound, &mut grads);
            adam.step(&mut store, &g, &mut state)?;
        }
        losses.push(total / train.len() as f64);
    }
    Ok((store, losses))
}
