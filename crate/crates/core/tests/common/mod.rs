//! Small trained artifacts shared by the integration tests.
#![allow(dead_code)]

use rand::Rng as _;
use recourse_core::data::{DataBundle, Dataset, Feature, FeatureSchema, Preprocessor, RawValue};
use recourse_core::model::{NetConfig, RecourseModel, TrainConfig};
use recourse_core::pipeline::{fit_gold, ToySpec};
use recourse_core::predictors::{train_mlp, ForestConfig, Gold, MlpClassifier, MlpConfig};
use recourse_core::rng::SeedStream;

pub fn tiny_train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        n_bins: 20,
        net: NetConfig {
            embed: 8,
            heads: 2,
            ffn: 8,
            enc_layers: 1,
            dec_layers: 1,
        },
        ..TrainConfig::toy()
    }
}

pub fn classifier(bundle: &DataBundle) -> MlpClassifier {
    let cfg = MlpConfig {
        restarts: 1,
        ..MlpConfig::default()
    };
    train_mlp(&bundle.train, Some(&bundle.test), &cfg).unwrap()
}

pub struct Fixture {
    pub bundle: DataBundle,
    pub gold: Gold,
    pub h: MlpClassifier,
    pub model: RecourseModel,
}

/// 400-point moons with analytic gold and a briefly trained model.
pub fn moons() -> Fixture {
    let mut bundle = ToySpec {
        n: 400,
        ..ToySpec::moons()
    }
    .bundle(1)
    .unwrap();
    let gold = fit_gold(&mut bundle, &ForestConfig::default(), 1).unwrap();
    let h = classifier(&bundle);
    let (model, _) = recourse_core::model::train(&bundle.train, &h, &tiny_train_config(3)).unwrap();
    Fixture { bundle, gold, h, model }
}

/// One continuous, one mutable categorical and one immutable categorical
/// feature; the label follows the continuous one.
pub fn mixed() -> Fixture {
    let schema = FeatureSchema::new(
        vec![
            Feature::continuous("income", true),
            Feature::categorical("color", &["red", "green", "blue"], true),
            Feature::categorical("group", &["a", "b"], false),
        ],
        "1",
    )
    .unwrap();
    let mut rng = SeedStream::new(5).rng("mixed");
    let colors = ["red", "green", "blue"];
    let raw: Vec<Vec<RawValue>> = (0..600)
        .map(|_| {
            vec![
                RawValue::Num(rng.random_range(10.0..90.0)),
                RawValue::Cat(colors[rng.random_range(0..3)].into()),
                RawValue::Cat(if rng.random::<bool>() { "a" } else { "b" }.into()),
            ]
        })
        .collect();
    let pre = Preprocessor::fit(&schema, &raw).unwrap();
    let rows: Vec<Vec<f64>> = raw
        .iter()
        .enumerate()
        .map(|(i, r)| pre.encode(&schema, r, i).unwrap())
        .collect();
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.5)).collect();
    let all = Dataset::new(schema, rows, Some(labels)).unwrap();
    let (train, test) = recourse_core::data::split(&all, 0.25, 2).unwrap();
    let bundle = DataBundle {
        name: "mixed".into(),
        preprocessor: pre,
        train,
        test,
        toy: None,
    };
    let gold = Gold::Forest(
        recourse_core::predictors::train_forest(
            &bundle.train,
            &ForestConfig {
                tree_count: 10,
                ..Default::default()
            },
        )
        .unwrap(),
    );
    let h = classifier(&bundle);
    let (model, _) = recourse_core::model::train(&bundle.train, &h, &tiny_train_config(2)).unwrap();
    Fixture { bundle, gold, h, model }
}
