//! Recourse API over one immutable artifact snapshot. Request validation
//! and response assembly live here; [`http`] adds the axum transport.

#[cfg(feature = "server")]
pub mod http;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::data::{DataBundle, FeatureKind, FeatureScaler, FeatureSchema, Preprocessor, RawValue};
use crate::error::{Error, Result};
use crate::evalkit::{LofConfig, LofModel};
use crate::model::RecourseModel;
use crate::pairing::l1;
use crate::pipeline::fit_lof;
use crate::predictors::{Gold, MlpClassifier};
use crate::sampling::{sample_recourse_batch, SampleConfig};

pub const MAX_SAMPLES: usize = 100;

/// Everything a request reads. Never mutated once built.
pub struct Snapshot {
    pub dataset: String,
    pub preprocessor: Preprocessor,
    pub model: RecourseModel,
    pub h: MlpClassifier,
    pub gold: Option<Gold>,
    pub lof: Option<LofModel>,
    pub checkpoint_sha256: String,
}

impl Snapshot {
    /// The LOF reference is fitted only when a gold model is supplied.
    pub fn new(
        bundle: &DataBundle,
        model: RecourseModel,
        h: MlpClassifier,
        gold: Option<Gold>,
        lof: &LofConfig,
    ) -> Result<Self> {
        if model.schema().fingerprint() != bundle.schema().fingerprint() {
            return Err(Error::Fingerprint {
                expected: bundle.schema().fingerprint(),
                found: model.schema().fingerprint(),
            });
        }
        let lof = match &gold {
            Some(g) => Some(fit_lof(bundle, g, lof)?),
            None => None,
        };
        Ok(Self {
            dataset: bundle.name.clone(),
            preprocessor: bundle.preprocessor.clone(),
            checkpoint_sha256: crate::cli::sha256_bytes(&model.to_bytes()?),
            model,
            h,
            gold,
            lof,
        })
    }

    /// Reads `labeled.json` (or `data.json`), `model.json`, `classifier.json`
    /// and, when present, `gold.json` from a run directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        use crate::cli::{CLASSIFIER, DATA, GOLD, LABELED, MODEL};
        let data = if dir.join(LABELED).is_file() { LABELED } else { DATA };
        let bundle = DataBundle::load(&dir.join(data))?;
        let model = RecourseModel::load(&dir.join(MODEL), Some(bundle.schema()))?;
        let h = MlpClassifier::load(&dir.join(CLASSIFIER))?;
        let gold = if dir.join(GOLD).is_file() {
            Some(Gold::load(&dir.join(GOLD))?)
        } else {
            None
        };
        Self::new(&bundle, model, h, gold, &LofConfig::default())
    }

    pub fn schema(&self) -> &FeatureSchema {
        self.model.schema()
    }

    pub fn info(&self) -> ModelInfo {
        ModelInfo {
            dataset: self.dataset.clone(),
            checkpoint_sha256: self.checkpoint_sha256.clone(),
            schema_fingerprint: self.schema().fingerprint(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn schema_view(&self) -> SchemaView {
        let features = self
            .schema()
            .features
            .iter()
            .zip(&self.preprocessor.scalers)
            .map(|(f, s)| {
                let (min, max, categories) = match s {
                    FeatureScaler::Continuous { min, max } => (Some(*min), Some(*max), None),
                    FeatureScaler::Categorical { vocab } => (None, None, Some(vocab.clone())),
                };
                FeatureView {
                    name: f.name.clone(),
                    kind: f.kind.clone(),
                    mutable: f.mutable,
                    min,
                    max,
                    categories,
                }
            })
            .collect();
        SchemaView {
            dataset: self.dataset.clone(),
            positive_label: self.schema().positive_label.clone(),
            features,
            checkpoint_sha256: self.checkpoint_sha256.clone(),
        }
    }
}

/// Holder of the current snapshot; a reload swaps the whole `Arc`.
#[derive(Clone, Default)]
pub struct AppState {
    current: Arc<RwLock<Option<Arc<Snapshot>>>>,
}

impl AppState {
    pub fn loaded(snapshot: Snapshot) -> Self {
        let s = Self::default();
        s.install(snapshot);
        s
    }

    pub fn install(&self, snapshot: Snapshot) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(snapshot));
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub dataset: String,
    pub checkpoint_sha256: String,
    pub schema_fingerprint: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureView {
    pub name: String,
    pub kind: FeatureKind,
    pub mutable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaView {
    pub dataset: String,
    pub positive_label: String,
    pub features: Vec<FeatureView>,
    pub checkpoint_sha256: String,
}

fn default_n() -> usize {
    10
}

fn default_tau() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecourseRequest {
    /// Raw feature values keyed by name.
    pub instance: BTreeMap<String, RawValue>,
    #[serde(default = "default_n")]
    pub n_samples: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Features held fixed for this request, on top of the schema's immutables.
    #[serde(default)]
    pub locks: Vec<String>,
    /// Fixed seed for reproducible draws; fresh entropy when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub instance: BTreeMap<String, RawValue>,
    pub h_score: f64,
    /// ℓ1 distance in the encoded space.
    pub cost: f64,
    pub gold_valid: Option<bool>,
    pub lof_inlier: Option<bool>,
    /// Raw-unit change per continuous feature; 1 when a categorical changed, else 0.
    pub delta: BTreeMap<String, f64>,
    pub sample_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseResponse {
    /// Sorted by `h_score`, highest first.
    pub candidates: Vec<CandidateView>,
    pub best_index: usize,
    pub seed: u64,
    pub model: ModelInfo,
}

/// Request failure, split by who is at fault.
#[derive(Debug)]
pub enum ApiError {
    /// Malformed request: unknown feature, bad value, bad parameter.
    BadRequest(Error),
    /// Well-formed but no feasible candidate exists.
    Unprocessable(Error),
    Internal(Error),
}

impl ApiError {
    pub fn error(&self) -> &Error {
        match self {
            ApiError::BadRequest(e) | ApiError::Unprocessable(e) | ApiError::Internal(e) => e,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error().fmt(f)
    }
}

fn bad(msg: String) -> ApiError {
    ApiError::BadRequest(Error::Invalid(msg))
}

/// Encoded query and per-coordinate immutability for a request.
pub fn encode_request(
    schema: &FeatureSchema,
    pre: &Preprocessor,
    req: &RecourseRequest,
) -> Result<(Vec<f64>, Vec<bool>), ApiError> {
    if !(1..=MAX_SAMPLES).contains(&req.n_samples) {
        return Err(bad(format!(
            "n_samples must lie in [1, {MAX_SAMPLES}], got {}",
            req.n_samples
        )));
    }
    if let Some(name) = req.instance.keys().find(|k| schema.feature_index(k).is_none()) {
        return Err(bad(format!("unknown feature `{name}`")));
    }
    if let Some(name) = req.locks.iter().find(|k| schema.feature_index(k).is_none()) {
        return Err(bad(format!("cannot lock unknown feature `{name}`")));
    }
    let raw = schema
        .features
        .iter()
        .map(|f| {
            req.instance
                .get(&f.name)
                .cloned()
                .ok_or_else(|| bad(format!("missing feature `{}`", f.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((f, _)) = schema
        .features
        .iter()
        .zip(&raw)
        .find(|(f, v)| f.kind == FeatureKind::Continuous && matches!(v, RawValue::Num(x) if !x.is_finite()))
    {
        return Err(bad(format!("feature `{}` is not finite", f.name)));
    }
    let x = pre.encode(schema, &raw, 0).map_err(ApiError::BadRequest)?;
    let mut mask = schema.immutable_mask();
    for g in schema.groups() {
        if req.locks.contains(&schema.features[g.feature].name) {
            mask[g.range].iter_mut().for_each(|m| *m = true);
        }
    }
    Ok((x, mask))
}

/// Samples, sorts by h, and annotates each candidate.
pub fn recourse(snap: &Snapshot, req: &RecourseRequest) -> Result<RecourseResponse, ApiError> {
    let schema = snap.schema();
    let (x, mask) = encode_request(schema, &snap.preprocessor, req)?;
    let seed = req.seed.unwrap_or_else(rand::random);
    let cfg = SampleConfig {
        tau: req.tau,
        sigma: req.sigma,
        n_samples: req.n_samples,
        seed,
    };
    cfg.validate().map_err(ApiError::BadRequest)?;
    let mut rec = sample_recourse_batch(std::slice::from_ref(&x), &snap.model, &snap.h, &mask, &cfg)
        .map_err(|e| match e {
            Error::AllInfeasible(_) => ApiError::Unprocessable(e),
            other => ApiError::Internal(other),
        })?
        .remove(0);
    rec.candidates.sort_by(|a, b| {
        b.h_score
            .total_cmp(&a.h_score)
            .then(a.sample_index.cmp(&b.sample_index))
    });
    let source = snap.preprocessor.decode(&x);
    let groups = schema.groups();
    let candidates = rec
        .candidates
        .iter()
        .map(|c| {
            let mut raw = snap.preprocessor.decode(&c.x);
            // unchanged features echo the request exactly, free of decode rounding
            for g in &groups {
                if c.x[g.range.clone()] == x[g.range.clone()] {
                    raw[g.feature] = req.instance[&schema.features[g.feature].name].clone();
                }
            }
            let delta = schema
                .features
                .iter()
                .zip(source.iter().zip(&raw))
                .zip(&groups)
                .map(|((f, pair), g)| {
                    let d = match pair {
                        _ if c.x[g.range.clone()] == x[g.range.clone()] => 0.0,
                        (RawValue::Num(a), RawValue::Num(b)) => b - a,
                        (a, b) => f64::from(u8::from(a != b)),
                    };
                    (f.name.clone(), d)
                })
                .collect();
            CandidateView {
                instance: schema.features.iter().map(|f| f.name.clone()).zip(raw).collect(),
                h_score: c.h_score,
                cost: l1(&x, &c.x),
                gold_valid: snap.gold.as_ref().map(|g| g.is_valid(&c.x)),
                lof_inlier: snap.lof.as_ref().map(|l| l.is_inlier(&c.x)),
                delta,
                sample_index: c.sample_index,
            }
        })
        .collect();
    Ok(RecourseResponse {
        candidates,
        best_index: 0,
        seed,
        model: snap.info(),
    })
}
