//! Run configuration: one JSON file with a section per stage. Command-line
//! flags override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::WachterConfig;
use crate::data::{load_csv, split, DataBundle, FeatureSchema};
use crate::error::{Error, Result};
use crate::evalkit::{LofConfig, SWEEP_LAMBDAS, THEORY_SIZES};
use crate::model::TrainConfig;
use crate::pipeline::{ExperimentConfig, ToySpec, DEFAULT_EVAL_SIZE};
use crate::predictors::{ForestConfig, MlpConfig};
use crate::sampling::SampleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSpec {
    Toy {
        name: String,
        #[serde(default)]
        n: Option<usize>,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_test_fraction() -> f64 {
    0.25
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::Toy {
            name: "moons".into(),
            n: None,
        }
    }
}

impl DatasetSpec {
    /// `moons`, `circles`, `corr`, or a path to a CSV whose schema sits
    /// next to it as `<stem>.schema.json`.
    pub fn from_flag(name: &str) -> Self {
        if ToySpec::by_name(name).is_some() {
            return Self::Toy {
                name: name.into(),
                n: None,
            };
        }
        let path = PathBuf::from(name);
        let schema = path.with_extension("schema.json");
        Self::Csv {
            path,
            schema,
            test_fraction: default_test_fraction(),
        }
    }

    pub fn load(&self, seed: u64) -> Result<DataBundle> {
        match self {
            Self::Toy { name, n } => {
                let mut spec =
                    ToySpec::by_name(name).ok_or_else(|| Error::Invalid(format!("unknown dataset `{name}`")))?;
                if let Some(n) = n {
                    spec.n = *n;
                }
                spec.bundle(seed)
            }
            Self::Csv {
                path,
                schema,
                test_fraction,
            } => {
                let schema = FeatureSchema::from_json_file(schema)?;
                let (data, preprocessor) = load_csv(path, &schema, None)?;
                let (train, test) = split(&data, *test_fraction, crate::rng::SeedStream::new(seed).seed("split"))?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(DataBundle {
                    name,
                    preprocessor,
                    train,
                    test,
                    toy: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub size: usize,
    pub lof: LofConfig,
    pub wachter: WachterConfig,
    /// Run the nearest-neighbor and gradient baselines alongside the sampler.
    pub baselines: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            size: DEFAULT_EVAL_SIZE,
            lof: LofConfig::default(),
            wachter: WachterConfig::default(),
            baselines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    pub lambdas: Vec<f64>,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            lambdas: SWEEP_LAMBDAS.to_vec(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryOptions {
    pub sizes: Vec<usize>,
    pub trials: usize,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        Self {
            sizes: THEORY_SIZES.to_vec(),
            trials: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourOptions {
    pub resolution: usize,
    /// Query point; the first evaluation instance when absent.
    pub query: Option<[f64; 2]>,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            resolution: 61,
            query: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub dataset: DatasetSpec,
    pub forest: ForestConfig,
    pub classifier: MlpConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalOptions,
    pub sweep: SweepOptions,
    pub theory: TheoryOptions,
    pub contours: ContourOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            dataset: DatasetSpec::default(),
            forest: ForestConfig::default(),
            classifier: MlpConfig::default(),
            train: TrainConfig::toy(),
            sample: SampleConfig::default(),
            eval: EvalOptions::default(),
            sweep: SweepOptions::default(),
            theory: TheoryOptions::default(),
            contours: ContourOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            forest: self.forest,
            mlp: self.classifier,
            lof: self.eval.lof,
            eval_size: self.eval.size,
        }
    }

    /// Canonical JSON used for the config hash.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(
            r#"{"seed": 7, "train": {"lambda": 2.0, "gamma": 0.7, "top_k": 100,
            "lr": 0.001, "batch": 64, "epochs": 3, "seed": 0, "n_bins": 50,
            "net": {"embed": 32, "heads": 4, "ffn": 32, "enc_layers": 4, "dec_layers": 4}}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.sample, SampleConfig::default());
        let back: RunConfig = serde_json::from_str(&c.canonical_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn dataset_flag() {
        assert!(matches!(DatasetSpec::from_flag("circles"), DatasetSpec::Toy { .. }));
        match DatasetSpec::from_flag("data/adult.csv") {
            DatasetSpec::Csv { schema, .. } => assert_eq!(schema, PathBuf::from("data/adult.schema.json")),
            other => panic!("{other:?}"),
        }
    }
}
