//! Recourse metrics, λ sweeps, density fields and the theory experiments.

mod lof;
mod svg;
mod theory;

use serde::{Deserialize, Serialize};

pub use lof::{Lof, LofConfig, LofModel, DEFAULT_NEIGHBORS, DEFAULT_THRESHOLD};
pub use svg::{heatmap_svg, scatter_svg, write_svg};
pub use theory::{
    degenerate_check, loglog_slope, theory_consistency, Component, DegenerateReport, TheoryOracle, TheoryReport,
    THEORY_SIZES,
};

use crate::error::{Error, Result};
use crate::model::RecourseModel;
use crate::pairing::l1;
use crate::predictors::Classifier;

/// Val + LOF − Cost/d.
pub fn score(validity: f64, lof: f64, cost: f64, d: usize) -> f64 {
    validity + lof - cost / d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub m: usize,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub validity: f64,
    pub lof: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub d: usize,
    pub methods: Vec<MethodMetrics>,
}

impl MetricsReport {
    pub fn get(&self, method: &str) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Aligned text table, one row per method.
    pub fn table(&self) -> String {
        let w = self.methods.iter().map(|m| m.method.len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "{:<w$}  {:>11}  {:>5}  {:>5}  {:>6}\n",
            "Method", "Cost", "Val", "LOF", "Score"
        );
        for m in &self.methods {
            out.push_str(&format!(
                "{:<w$}  {:>5.2}±{:<5.2}  {:>5.2}  {:>5.2}  {:>6.3}\n",
                m.method, m.cost_mean, m.cost_std, m.validity, m.lof, m.score
            ));
        }
        out
    }
}

/// Metrics for one method's outputs, paired index-wise with their sources.
pub fn evaluate(
    method: &str,
    sources: &[Vec<f64>],
    outputs: &[Vec<f64>],
    gold: &dyn Classifier,
    lof: &LofModel,
    d: usize,
) -> Result<MethodMetrics> {
    if sources.len() != outputs.len() || sources.is_empty() {
        return Err(Error::shape(
            "evaluate",
            format!("{} sources for {} outputs", sources.len(), outputs.len()),
        ));
    }
    let m = sources.len() as f64;
    let costs: Vec<f64> = sources.iter().zip(outputs).map(|(s, o)| l1(s, o)).collect();
    let cost_mean = costs.iter().sum::<f64>() / m;
    let cost_std = (costs.iter().map(|c| (c - cost_mean).powi(2)).sum::<f64>() / m).sqrt();
    let proba = gold.predict_proba_batch(outputs)?;
    let validity = proba.iter().filter(|&&p| p >= 0.5).count() as f64 / m;
    let inliers = outputs.iter().filter(|o| lof.is_inlier(o)).count() as f64 / m;
    Ok(MethodMetrics {
        method: method.to_string(),
        m: sources.len(),
        cost_mean,
        cost_std,
        validity,
        lof: inliers,
        score: score(validity, inliers, cost_mean, d),
    })
}

pub const SWEEP_LAMBDAS: [f64; 5] = [0.5, 1.0, 2.5, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// −Cost/d.
    pub neg_cost: f64,
    pub cost: f64,
    pub validity: f64,
    pub lof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// λ values whose run failed, with the error text.
    pub failures: Vec<(f64, String)>,
}

/// Runs `run` for each λ; failures are recorded and the sweep continues.
pub fn lambda_sweep(lambdas: &[f64], d: usize, mut run: impl FnMut(f64) -> Result<MethodMetrics>) -> SweepResult {
    let mut out = SweepResult {
        points: Vec::new(),
        failures: Vec::new(),
    };
    for &lambda in lambdas {
        match run(lambda) {
            Ok(m) => out.points.push(SweepPoint {
                lambda,
                neg_cost: -m.cost_mean / d as f64,
                cost: m.cost_mean,
                validity: m.validity,
                lof: m.lof,
            }),
            Err(e) => out.failures.push((lambda, e.to_string())),
        }
    }
    out
}

/// Log-density of a 2D model on a regular grid over the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub axis: Vec<f64>,
    /// `values[i][j]` at `(axis[i], axis[j])`.
    pub values: Vec<Vec<f64>>,
    pub query: [f64; 2],
}

impl DensityField {
    pub fn argmax(&self) -> [f64; 2] {
        let mut best = (0, 0);
        for (i, col) in self.values.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                if *v > self.values[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        [self.axis[best.0], self.axis[best.1]]
    }

    /// Fraction of grid cells in the smallest set holding `mass` of the
    /// normalized density.
    pub fn high_density_fraction(&self, mass: f64) -> f64 {
        let mut v: Vec<f64> = self.values.iter().flatten().copied().collect();
        let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = v.drain(..).map(|l| (l - top).exp()).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        let z: f64 = p.iter().sum();
        let mut acc = 0.0;
        for (i, q) in p.iter().enumerate() {
            acc += q / z;
            if acc >= mass {
                return (i + 1) as f64 / p.len() as f64;
            }
        }
        1.0
    }

    pub fn svg(&self) -> Result<String> {
        heatmap_svg(&self.axis, &self.axis, &self.values, self.query)
    }
}

pub fn density_contours(model: &RecourseModel, query: &[f64], resolution: usize) -> Result<DensityField> {
    if model.dim() != 2 || query.len() != 2 {
        return Err(Error::Invalid("density contours need a 2D model".into()));
    }
    if resolution < 2 {
        return Err(Error::Invalid("grid resolution must be at least 2".into()));
    }
    let axis: Vec<f64> = (0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect();
    let targets: Vec<Vec<f64>> = axis
        .iter()
        .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
        .collect();
    let queries = vec![query.to_vec(); targets.len()];
    let mut flat = Vec::with_capacity(targets.len());
    for (t, q) in targets.chunks(1024).zip(queries.chunks(1024)) {
        flat.extend(model.log_density_batch(t, q)?);
    }
    let values = flat.chunks(resolution).map(<[f64]>::to_vec).collect();
    Ok(DensityField {
        axis,
        values,
        query: [query[0], query[1]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Threshold;

    impl Classifier for Threshold {
        fn input_dim(&self) -> usize {
            1
        }
        fn proba(&self, x: &[f64]) -> f64 {
            x[0]
        }
    }

    #[test]
    fn score_formula() {
        assert!((score(1.0, 0.98, 0.69, 13) - 1.926_923_076_923_077).abs() < 1e-12);
        assert_eq!(score(1.0, 1.0, 0.0, 5), 2.0);
        assert!((score(0.99, 0.97, 0.51, 7) - 1.887_142_857_142_857).abs() < 1e-12);
    }

    #[test]
    fn evaluate_counts() {
        let reference: Vec<Vec<f64>> = (0..30).map(|i| vec![0.5 + i as f64 * 0.01]).collect();
        let lof = LofModel::fit(&reference, &[1; 30], &LofConfig::default()).unwrap();
        let sources = vec![vec![0.0], vec![0.1], vec![0.2], vec![0.3]];
        let outputs = vec![vec![0.6], vec![0.7], vec![0.4], vec![5.0]];
        let m = evaluate("x", &sources, &outputs, &Threshold, &lof, 1).unwrap();
        assert_eq!(m.validity, 0.75);
        assert_eq!(m.lof, 0.5);
        assert!((m.cost_mean - (0.6 + 0.6 + 0.2 + 4.7) / 4.0).abs() < 1e-12);
        assert!((m.score - (m.validity + m.lof - m.cost_mean)).abs() < 1e-9);
        let report = MetricsReport {
            dataset: "t".into(),
            d: 1,
            methods: vec![m],
        };
        let table = report.table();
        assert_eq!(table.lines().count(), 2);
        assert!(evaluate("x", &sources, &outputs[..2], &Threshold, &lof, 1).is_err());
    }

    #[test]
    fn sweep_continues_past_failures() {
        let r = lambda_sweep(&SWEEP_LAMBDAS, 2, |l| {
            if l == 1.0 {
                return Err(Error::Invalid("boom".into()));
            }
            Ok(MethodMetrics {
                method: "g".into(),
                m: 1,
                cost_mean: 1.0 / l,
                cost_std: 0.0,
                validity: 1.0,
                lof: 1.0,
                score: 0.0,
            })
        });
        assert_eq!(r.points.len(), 4);
        assert_eq!(r.failures.len(), 1);
        assert!((r.points[0].neg_cost + 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_density_fraction_of_peaked_field() {
        let axis = vec![0.0, 0.5, 1.0];
        let mut values = vec![vec![-50.0; 3]; 3];
        values[1][1] = 0.0;
        let f = DensityField {
            axis: axis.clone(),
            values,
            query: [0.0, 0.0],
        };
        assert!((f.high_density_fraction(0.9) - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(f.argmax(), [0.5, 0.5]);
        let flat = DensityField {
            axis,
            values: vec![vec![0.0; 3]; 3],
            query: [0.0, 0.0],
        };
        assert!(flat.high_density_fraction(0.9) > 0.8);
    }
}
