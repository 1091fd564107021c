//! Tabular schemas, min-max/one-hot encoding, CSV ingestion, stratified
//! splitting, and synthetic 2D datasets.

mod csv_io;
mod synthetic;

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use csv_io::{load_csv, read_csv_table};
pub use synthetic::{gen_circles, gen_corr, gen_moons, CorrParams, ToyData, ToyKind};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Tolerance for encoded values sitting slightly outside `[0, 1]`.
pub const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<usize>,
    /// Fixed category order; fitted (sorted) from data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    pub mutable: bool,
}

impl Feature {
    pub fn continuous(name: &str, mutable: bool) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            cardinality: None,
            categories: None,
            mutable,
        }
    }

    pub fn categorical(name: &str, categories: &[&str], mutable: bool) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            cardinality: Some(categories.len()),
            categories: Some(categories.iter().map(|s| s.to_string()).collect()),
            mutable,
        }
    }

    /// Number of encoded coordinates this feature occupies.
    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Continuous => 1,
            FeatureKind::Categorical => self.cardinality.unwrap_or(0),
        }
    }
}

/// Ordered feature list with immutability flags and the favorable label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
    #[serde(default = "default_label")]
    pub label: String,
    pub positive_label: String,
}

fn default_label() -> String {
    "label".to_string()
}

/// Location of one feature inside the encoded vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGroup {
    pub feature: usize,
    pub range: Range<usize>,
    pub categorical: bool,
    pub mutable: bool,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>, positive_label: &str) -> Result<Self> {
        let s = Self {
            features,
            label: default_label(),
            positive_label: positive_label.to_string(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: FeatureSchema = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for f in &self.features {
            if seen.insert(f.name.as_str(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.kind == FeatureKind::Categorical {
                let card = match (&f.cardinality, &f.categories) {
                    (Some(c), Some(v)) if *c != v.len() => {
                        return Err(Error::Schema(format!(
                            "`{}`: cardinality {c} but {} categories",
                            f.name,
                            v.len()
                        )))
                    }
                    (Some(c), _) => *c,
                    (None, Some(v)) => v.len(),
                    (None, None) => {
                        return Err(Error::Schema(format!(
                            "`{}`: categorical feature needs a cardinality",
                            f.name
                        )))
                    }
                };
                if card < 2 {
                    return Err(Error::Schema(format!("`{}`: cardinality must be at least 2", f.name)));
                }
            }
        }
        if !self.features.iter().any(|f| f.mutable) {
            return Err(Error::Schema("at least one feature must be mutable".into()));
        }
        Ok(())
    }

    pub fn encoded_dim(&self) -> usize {
        self.features.iter().map(Feature::width).sum()
    }

    pub fn groups(&self) -> Vec<EncodedGroup> {
        let mut start = 0;
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let w = f.width();
                let g = EncodedGroup {
                    feature: i,
                    range: start..start + w,
                    categorical: f.kind == FeatureKind::Categorical,
                    mutable: f.mutable,
                };
                start += w;
                g
            })
            .collect()
    }

    /// Encoded ranges of the one-hot groups.
    pub fn categorical_groups(&self) -> Vec<Range<usize>> {
        self.groups()
            .into_iter()
            .filter(|g| g.categorical)
            .map(|g| g.range)
            .collect()
    }

    /// Per encoded coordinate: true when the owning feature is immutable.
    pub fn immutable_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.encoded_dim());
        for f in &self.features {
            mask.extend(std::iter::repeat_n(!f.mutable, f.width()));
        }
        mask
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Stable short hash of the encoded layout, recorded in checkpoints.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(&Sha256::digest(bytes)[..8])
    }
}

/// One raw (unencoded) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Num(f64),
    Cat(String),
}

impl std::fmt::Display for RawValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawValue::Num(v) => write!(f, "{v}"),
            RawValue::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureScaler {
    Continuous { min: f64, max: f64 },
    Categorical { vocab: Vec<String> },
}

/// Fitted min-max ranges and category vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub scalers: Vec<FeatureScaler>,
}

impl Preprocessor {
    /// Fits on raw rows (one `RawValue` per schema feature).
    pub fn fit(schema: &FeatureSchema, rows: &[Vec<RawValue>]) -> Result<Self> {
        let mut scalers = Vec::with_capacity(schema.features.len());
        for (j, f) in schema.features.iter().enumerate() {
            match f.kind {
                FeatureKind::Continuous => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for (i, r) in rows.iter().enumerate() {
                        let v = numeric(&r[j], i, &f.name)?;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    if !(lo < hi) {
                        return Err(Error::Schema(format!("`{}`: degenerate range [{lo}, {hi}]", f.name)));
                    }
                    scalers.push(FeatureScaler::Continuous { min: lo, max: hi });
                }
                FeatureKind::Categorical => {
                    let vocab = match &f.categories {
                        Some(v) => v.clone(),
                        None => {
                            let mut v: Vec<String> = rows.iter().map(|r| r[j].to_string()).collect();
                            v.sort();
                            v.dedup();
                            let card = f.width();
                            if v.len() != card {
                                return Err(Error::Schema(format!(
                                    "`{}`: expected {card} categories, found {}",
                                    f.name,
                                    v.len()
                                )));
                            }
                            v
                        }
                    };
                    scalers.push(FeatureScaler::Categorical { vocab });
                }
            }
        }
        Ok(Self { scalers })
    }

    /// Encodes a raw row; continuous values outside the fitted range clamp.
    pub fn encode(&self, schema: &FeatureSchema, raw: &[RawValue], row: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(schema.encoded_dim());
        for ((f, s), v) in schema.features.iter().zip(&self.scalers).zip(raw) {
            match s {
                FeatureScaler::Continuous { min, max } => {
                    let x = numeric(v, row, &f.name)?;
                    out.push(((x - min) / (max - min)).clamp(0.0, 1.0));
                }
                FeatureScaler::Categorical { vocab } => {
                    let key = v.to_string();
                    let k = vocab
                        .iter()
                        .position(|c| *c == key)
                        .ok_or_else(|| Error::UnknownCategory {
                            feature: f.name.clone(),
                            value: key.clone(),
                        })?;
                    out.extend((0..vocab.len()).map(|i| if i == k { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }

    /// Maps an encoded vector back to raw values (argmax within one-hots).
    pub fn decode(&self, encoded: &[f64]) -> Vec<RawValue> {
        let mut at = 0;
        self.scalers
            .iter()
            .map(|s| match s {
                FeatureScaler::Continuous { min, max } => {
                    let v = min + encoded[at] * (max - min);
                    at += 1;
                    RawValue::Num(v)
                }
                FeatureScaler::Categorical { vocab } => {
                    let slice = &encoded[at..at + vocab.len()];
                    at += vocab.len();
                    RawValue::Cat(vocab[argmax_first(slice)].clone())
                }
            })
            .collect()
    }

    /// Raw-unit value of continuous coordinate `feature` for encoded `u`.
    pub fn denormalize(&self, feature: usize, u: f64) -> Option<f64> {
        match &self.scalers[feature] {
            FeatureScaler::Continuous { min, max } => Some(min + u * (max - min)),
            FeatureScaler::Categorical { .. } => None,
        }
    }
}

fn numeric(v: &RawValue, row: usize, feature: &str) -> Result<f64> {
    match v {
        RawValue::Num(x) => Ok(*x),
        RawValue::Cat(s) => s.trim().parse::<f64>().map_err(|_| Error::BadNumber {
            row,
            feature: feature.to_string(),
            value: s.clone(),
        }),
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Encoded rows in `[0, 1]` with optional binary labels (1 = favorable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        let d = Self { schema, rows, labels };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.schema.encoded_dim()
    }

    pub fn label(&self, i: usize) -> Option<u8> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Invalid("dataset has no labels".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.schema.encoded_dim();
        let groups = self.schema.categorical_groups();
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Invalid(format!("row {i} has {} values, expected {d}", r.len())));
            }
            if let Some(v) = r.iter().find(|v| !(-RANGE_EPS..=1.0 + RANGE_EPS).contains(*v)) {
                return Err(Error::Invalid(format!("row {i}: value {v} outside [0, 1]")));
            }
            for g in &groups {
                let s: f64 = r[g.clone()].iter().sum();
                let binary = r[g.clone()].iter().all(|&v| v == 0.0 || v == 1.0);
                if !binary || s != 1.0 {
                    return Err(Error::Invalid(format!("row {i}: malformed one-hot group {g:?}")));
                }
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.rows.len() {
                return Err(Error::Invalid("label count differs from row count".into()));
            }
            if l.iter().any(|&y| y > 1) {
                return Err(Error::Invalid("labels must be 0 or 1".into()));
            }
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Dataset> {
        Dataset::new(self.schema.clone(), self.rows.clone(), Some(labels))
    }

    /// Concatenates rows (and labels, when both have them).
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Dataset {
            schema: self.schema.clone(),
            rows,
            labels,
        }
    }
}

/// Train/test row indices from a stratified split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split. The overall test size is `round(n · test_fraction)`,
/// apportioned across classes by largest remainder.
pub fn split_indices(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let labels = dataset.labels()?;
    let mut rng = rng_from_seed(seed);
    let mut classes = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Invalid(format!(
                "class {class} has {} row(s); need at least 2 to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        classes.push(idx);
    }
    let exact: Vec<f64> = classes.iter().map(|c| c.len() as f64 * test_fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let target = (labels.len() as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(target.saturating_sub(quota.iter().sum())) {
        quota[c] += 1;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, q) in classes.iter().zip(quota) {
        let q = q.clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..q]);
        train.extend_from_slice(&idx[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let s = split_indices(dataset, test_fraction, seed)?;
    Ok((dataset.subset(&s.train), dataset.subset(&s.test)))
}

/// Train/test split plus everything needed to interpret the encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBundle {
    pub name: String,
    pub preprocessor: Preprocessor,
    pub train: Dataset,
    pub test: Dataset,
    /// Generator description for synthetic data (enables the analytic gold).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyKind>,
}

impl DataBundle {
    pub fn schema(&self) -> &FeatureSchema {
        &self.train.schema
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let b: DataBundle = serde_json::from_slice(&bytes)?;
        b.train.validate()?;
        b.test.validate()?;
        Ok(b)
    }
}
