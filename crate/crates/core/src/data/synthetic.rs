//! Two-dimensional toy datasets with known ground-truth structure.
//!
//! Each generator is a pure function of its parameters and seed. Raw points
//! are min-max normalized over the generated set; the fitted preprocessor is
//! returned so the analytic gold classifiers can work in raw coordinates.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Feature, FeatureSchema, Preprocessor, RawValue};
use crate::error::Result;
use crate::rng::{rng_from_seed, Rng};

/// Generator description, enough to rebuild the analytic gold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ToyKind {
    Moons { noise: f64 },
    Circles { noise: f64, factor: f64 },
    Corr(CorrParams),
}

/// Two Gaussian clusters sharing a correlated covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrParams {
    pub rho: f64,
    /// Distance between cluster means along the correlation axis.
    pub offset: f64,
}

impl Default for CorrParams {
    fn default() -> Self {
        Self { rho: 0.9, offset: 3.0 }
    }
}

impl CorrParams {
    pub fn mean(&self, class: u8) -> [f64; 2] {
        let s = self.offset / std::f64::consts::SQRT_2;
        if class == 1 {
            [s, s]
        } else {
            [0.0, 0.0]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub kind: ToyKind,
    pub dataset: Dataset,
    pub preprocessor: Preprocessor,
    /// Raw (pre-normalization) coordinates, row-aligned with `dataset`.
    pub raw: Vec<[f64; 2]>,
}

fn toy_schema() -> FeatureSchema {
    FeatureSchema::new(
        vec![Feature::continuous("x1", true), Feature::continuous("x2", true)],
        "1",
    )
    .expect("toy schema is valid")
}

fn finish(kind: ToyKind, mut points: Vec<([f64; 2], u8)>, rng: &mut Rng) -> Result<ToyData> {
    points.shuffle(rng);
    let schema = toy_schema();
    let raw_rows: Vec<Vec<RawValue>> = points
        .iter()
        .map(|(p, _)| vec![RawValue::Num(p[0]), RawValue::Num(p[1])])
        .collect();
    let pre = Preprocessor::fit(&schema, &raw_rows)?;
    let rows = raw_rows
        .iter()
        .enumerate()
        .map(|(i, r)| pre.encode(&schema, r, i))
        .collect::<Result<Vec<_>>>()?;
    let labels = points.iter().map(|(_, y)| *y).collect();
    Ok(ToyData {
        kind,
        dataset: Dataset::new(schema, rows, Some(labels))?,
        preprocessor: pre,
        raw: points.into_iter().map(|(p, _)| p).collect(),
    })
}

fn noisy(rng: &mut Rng, p: [f64; 2], noise: f64) -> [f64; 2] {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    [p[0] + noise * a, p[1] + noise * b]
}

fn linspace(lo: f64, hi: f64, n: usize, endpoint: bool) -> impl Iterator<Item = f64> {
    let div = if endpoint { n.saturating_sub(1).max(1) } else { n.max(1) };
    let step = (hi - lo) / div as f64;
    (0..n).map(move |i| lo + step * i as f64)
}

/// Two interleaving half circles. Class 0 is the upper arc of radius 1;
/// class 1 is the mirrored arc centered at `(1, 0.5)`.
pub fn gen_moons(n: usize, noise: f64, seed: u64) -> Result<ToyData> {
    let mut rng = rng_from_seed(seed);
    let n_out = n / 2;
    let n_in = n - n_out;
    let mut pts = Vec::with_capacity(n);
    for t in linspace(0.0, PI, n_out, true) {
        pts.push((noisy(&mut rng, [t.cos(), t.sin()], noise), 0));
    }
    for t in linspace(0.0, PI, n_in, true) {
        pts.push((noisy(&mut rng, [1.0 - t.cos(), 0.5 - t.sin()], noise), 1));
    }
    finish(ToyKind::Moons { noise }, pts, &mut rng)
}

/// Concentric circles: class 0 on the unit circle, class 1 at radius `factor`.
pub fn gen_circles(n: usize, noise: f64, factor: f64, seed: u64) -> Result<ToyData> {
    let mut rng = rng_from_seed(seed);
    let n_out = n / 2;
    let n_in = n - n_out;
    let mut pts = Vec::with_capacity(n);
    for t in linspace(0.0, 2.0 * PI, n_out, false) {
        pts.push((noisy(&mut rng, [t.cos(), t.sin()], noise), 0));
    }
    for t in linspace(0.0, 2.0 * PI, n_in, false) {
        pts.push((noisy(&mut rng, [factor * t.cos(), factor * t.sin()], noise), 1));
    }
    finish(ToyKind::Circles { noise, factor }, pts, &mut rng)
}

/// Equal-sized Gaussian clusters with unit variances and correlation `rho`;
/// the class-1 mean is shifted along the correlation axis.
pub fn gen_corr(n: usize, params: CorrParams, seed: u64) -> Result<ToyData> {
    let mut rng = rng_from_seed(seed);
    let tail = (1.0 - params.rho * params.rho).sqrt();
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let class = u8::from(i >= n / 2);
        let m = params.mean(class);
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        pts.push(([m[0] + a, m[1] + params.rho * a + tail * b], class));
    }
    finish(ToyKind::Corr(params), pts, &mut rng)
}
