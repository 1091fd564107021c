//! Training supervision: split rows into negatives and a confident-positive
//! pool, then pair each negative with a softmax over low-cost pool members.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::predictors::Classifier;
use crate::rng::Rng;

pub const DEFAULT_GAMMA: f64 = 0.7;
pub const DEFAULT_TOP_K: usize = 100;
pub const DEFAULT_LAMBDA: f64 = 5.0;

/// ℓ1 distance over encoded coordinates; infinite when immutables differ.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFn {
    immutable: Vec<bool>,
    names: Vec<String>,
}

impl CostFn {
    pub fn new(schema: &FeatureSchema) -> Self {
        Self::with_immutable(schema, schema.immutable_mask())
    }

    /// Cost with an explicit per-coordinate immutability mask.
    pub fn with_immutable(schema: &FeatureSchema, immutable: Vec<bool>) -> Self {
        let mut names = Vec::with_capacity(immutable.len());
        for f in &schema.features {
            names.extend(std::iter::repeat_n(f.name.clone(), f.width()));
        }
        Self { immutable, names }
    }

    pub fn immutable_mask(&self) -> &[bool] {
        &self.immutable
    }

    /// `None` means infeasible.
    pub fn cost(&self, x: &[f64], other: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for ((a, b), &fixed) in x.iter().zip(other).zip(&self.immutable) {
            if fixed {
                if a != b {
                    return None;
                }
            } else {
                total += (a - b).abs();
            }
        }
        Some(total)
    }

    fn immutable_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .names
            .iter()
            .zip(&self.immutable)
            .filter(|(_, &f)| f)
            .map(|(n, _)| n.clone())
            .collect();
        out.dedup();
        out
    }
}

/// Plain ℓ1 distance.
pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Row indices of the negatives (y=0, h ≤ 0.5) and the pool (y=1, h > γ).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub negatives: Vec<usize>,
    pub pool: Vec<usize>,
}

pub fn partition(train: &Dataset, h: &dyn Classifier, gamma: f64) -> Result<Partition> {
    if !(0.5..1.0).contains(&gamma) {
        return Err(Error::Invalid(format!("γ = {gamma} must lie in [0.5, 1)")));
    }
    let labels = train.labels()?;
    let scores = h.predict_proba_batch(&train.rows)?;
    let mut p = Partition {
        negatives: Vec::new(),
        pool: Vec::new(),
    };
    for (i, (&y, &s)) in labels.iter().zip(&scores).enumerate() {
        if y == 0 && s <= 0.5 {
            p.negatives.push(i);
        } else if y == 1 && s > gamma {
            p.pool.push(i);
        }
    }
    if p.pool.is_empty() {
        return Err(Error::EmptyPool { gamma });
    }
    if p.negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    Ok(p)
}

/// Truncated softmax over pool members for one negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistribution {
    /// Positions in the pool row list, in decreasing weight order.
    pub candidates: Vec<usize>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub top_k: usize,
}

impl PairDistribution {
    /// Candidate with the largest weight.
    pub fn mode(&self) -> usize {
        self.candidates[0]
    }
}

/// Weights ∝ exp(−λ·cost) over feasible pool members, kept to the `top_k`
/// cheapest (ties to the lower pool position) and renormalized.
pub fn build_q(x: &[f64], pool: &[Vec<f64>], cost: &CostFn, lambda: f64, top_k: usize) -> Result<PairDistribution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Invalid(format!("λ = {lambda} must be finite and non-negative")));
    }
    if top_k == 0 {
        return Err(Error::Invalid("top-K must be positive".into()));
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool { gamma: f64::NAN });
    }
    let mut feasible: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter_map(|(i, p)| cost.cost(x, p).map(|c| (c, i)))
        .collect();
    if feasible.is_empty() {
        return Err(Error::AllInfeasible(format!(
            "no pool member matches immutable features {:?}",
            cost.immutable_names()
        )));
    }
    let by_cost = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if feasible.len() > top_k {
        feasible.select_nth_unstable_by(top_k - 1, by_cost);
        feasible.truncate(top_k);
    }
    feasible.sort_unstable_by(by_cost);
    let c_min = feasible[0].0;
    let mut weights: Vec<f64> = feasible.iter().map(|(c, _)| (-lambda * (c - c_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(PairDistribution {
        candidates: feasible.into_iter().map(|(_, i)| i).collect(),
        weights,
        lambda,
        top_k,
    })
}

/// Categorical draw; returns a pool position.
pub fn sample_pair(q: &PairDistribution, rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (&c, &w) in q.candidates.iter().zip(&q.weights) {
        acc += w;
        if u < acc {
            return c;
        }
    }
    *q.candidates.last().expect("non-empty distribution")
}

/// Pair distributions for every negative with at least one feasible partner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    /// Train-row indices of the pool; `PairDistribution` positions index here.
    pub pool: Vec<usize>,
    /// Train-row index of each negative paired below.
    pub negatives: Vec<usize>,
    pub dists: Vec<PairDistribution>,
    /// Negatives dropped because every pool member was infeasible.
    pub skipped: Vec<usize>,
}

impl PairTable {
    pub fn build(train: &Dataset, part: &Partition, cost: &CostFn, lambda: f64, top_k: usize) -> Result<Self> {
        let pool_rows: Vec<Vec<f64>> = part.pool.iter().map(|&i| train.rows[i].clone()).collect();
        let built: Vec<(usize, Result<PairDistribution>)> = part
            .negatives
            .par_iter()
            .map(|&i| (i, build_q(&train.rows[i], &pool_rows, cost, lambda, top_k)))
            .collect();
        let mut table = PairTable {
            pool: part.pool.clone(),
            negatives: Vec::new(),
            dists: Vec::new(),
            skipped: Vec::new(),
        };
        for (i, q) in built {
            match q {
                Ok(q) => {
                    table.negatives.push(i);
                    table.dists.push(q);
                }
                Err(Error::AllInfeasible(_)) => table.skipped.push(i),
                Err(e) => return Err(e),
            }
        }
        if table.dists.is_empty() {
            return Err(Error::AllInfeasible(
                "no negative has a feasible partner in the pool".into(),
            ));
        }
        Ok(table)
    }

    /// One JSON object per negative: train indices of candidates and weights.
    pub fn dump_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            negative: usize,
            candidates: Vec<usize>,
            weights: &'a [f64],
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for (&neg, q) in self.negatives.iter().zip(&self.dists) {
            let line = Line {
                negative: neg,
                candidates: q.candidates.iter().map(|&c| self.pool[c]).collect(),
                weights: &q.weights,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn plain(d: usize) -> FeatureSchema {
        FeatureSchema::new(
            (0..d).map(|i| Feature::continuous(&format!("f{i}"), true)).collect(),
            "1",
        )
        .unwrap()
    }

    fn with_fixed_group() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                Feature::continuous("a", true),
                Feature::categorical("g", &["p", "q"], false),
            ],
            "1",
        )
        .unwrap()
    }

    struct Lookup(Vec<f64>);

    impl Classifier for Lookup {
        fn input_dim(&self) -> usize {
            1
        }
        fn proba(&self, x: &[f64]) -> f64 {
            self.0[(x[0] * 10.0).round() as usize]
        }
    }

    fn tiny() -> Dataset {
        let rows = (0..4).map(|i| vec![i as f64 / 10.0]).collect();
        Dataset::new(plain(1), rows, Some(vec![1, 1, 0, 0])).unwrap()
    }

    #[test]
    fn partition_definitions() {
        let d = tiny();
        let h = Lookup(vec![0.9, 0.9, 0.1, 0.7]);
        let p = partition(&d, &h, 0.5).unwrap();
        assert_eq!(p.pool, vec![0, 1]);
        // row 3 has y=0 but h=0.7: in neither set
        assert_eq!(p.negatives, vec![2]);
        let err = partition(&d, &h, 0.95).unwrap_err();
        assert!(err.to_string().starts_with("no confident positives; lower γ"));
    }

    #[test]
    fn cost_examples() {
        let c = CostFn::new(&plain(2));
        assert_eq!(c.cost(&[0.2, 0.4], &[0.2, 0.4]), Some(0.0));
        assert!((c.cost(&[0.0, 0.0], &[0.3, 0.4]).unwrap() - 0.7).abs() < 1e-15);
        let c = CostFn::new(&with_fixed_group());
        assert_eq!(c.cost(&[0.1, 1.0, 0.0], &[0.1, 0.0, 1.0]), None);
        assert!((c.cost(&[0.1, 1.0, 0.0], &[0.5, 1.0, 0.0]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn q_examples() {
        let c = CostFn::new(&plain(1));
        let q = build_q(&[0.0], &[vec![0.3], vec![-0.3]], &c, 2.0, 10).unwrap();
        assert_eq!(q.weights, vec![0.5, 0.5]);
        let q = build_q(&[0.0], &[vec![0.0], vec![3f64.ln()]], &c, 1.0, 10).unwrap();
        assert!((q.weights[0] - 0.75).abs() < 1e-12 && (q.weights[1] - 0.25).abs() < 1e-12);
        let q = build_q(&[0.0], &[vec![0.5], vec![0.1], vec![0.2]], &c, 1.0, 1).unwrap();
        assert_eq!((q.candidates.as_slice(), q.weights.as_slice()), (&[1][..], &[1.0][..]));
    }

    #[test]
    fn top_k_ties_prefer_lower_index() {
        let c = CostFn::new(&plain(1));
        let pool = vec![vec![0.5], vec![0.2], vec![-0.2], vec![0.2]];
        let q = build_q(&[0.0], &pool, &c, 1.0, 2).unwrap();
        assert_eq!(q.candidates, vec![1, 2]);
    }

    #[test]
    fn all_infeasible_names_immutables() {
        let c = CostFn::new(&with_fixed_group());
        let err = build_q(&[0.1, 1.0, 0.0], &[vec![0.1, 0.0, 1.0]], &c, 1.0, 5).unwrap_err();
        assert!(err.to_string().contains("\"g\""), "{err}");
    }

    #[test]
    fn large_lambda_selects_nearest_feasible() {
        let c = CostFn::new(&with_fixed_group());
        let pool = vec![
            vec![0.11, 0.0, 1.0],
            vec![0.5, 1.0, 0.0],
            vec![0.3, 1.0, 0.0],
            vec![0.9, 1.0, 0.0],
        ];
        let q = build_q(&[0.1, 1.0, 0.0], &pool, &c, 1e3, 10).unwrap();
        assert_eq!(q.mode(), 2);
        assert!(q.weights[0] > 1.0 - 1e-12);
    }

    #[test]
    fn sampling_frequencies() {
        let q = PairDistribution {
            candidates: vec![4, 9],
            weights: vec![0.75, 0.25],
            lambda: 1.0,
            top_k: 2,
        };
        let mut rng = rng_from_seed(1);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_pair(&q, &mut rng) == 4).count();
        assert!((hits as f64 / n as f64 - 0.75).abs() < 0.01);
        let one = PairDistribution {
            candidates: vec![7],
            weights: vec![1.0],
            lambda: 1.0,
            top_k: 1,
        };
        assert!((0..100).all(|_| sample_pair(&one, &mut rng) == 7));
        let draw = |s| {
            let mut r = rng_from_seed(s);
            (0..20).map(|_| sample_pair(&q, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn table_pairs_respect_immutables_and_pool() {
        let s = with_fixed_group();
        let rows = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.2, 0.0, 1.0],
            vec![0.9, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.5, 0.0, 1.0],
        ];
        let d = Dataset::new(s.clone(), rows, Some(vec![0, 0, 1, 1, 0])).unwrap();
        let part = Partition {
            negatives: vec![0, 1, 4],
            pool: vec![2, 3],
        };
        let cost = CostFn::new(&s);
        let t = PairTable::build(&d, &part, &cost, 5.0, 10).unwrap();
        let mut rng = rng_from_seed(0);
        for (&neg, q) in t.negatives.iter().zip(&t.dists) {
            for _ in 0..20 {
                let partner = t.pool[sample_pair(q, &mut rng)];
                assert_eq!(d.rows[neg][1..], d.rows[partner][1..]);
                assert_eq!(d.labels.as_ref().unwrap()[partner], 1);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        t.dump_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["candidates"], serde_json::json!([2]));
    }

    proptest! {
        #[test]
        fn weights_normalized_and_scale_invariant(
            costs in proptest::collection::vec(0.0f64..2.0, 1..30),
            lambda in 0.1f64..20.0,
            c in 0.1f64..10.0,
            k in 1usize..40,
        ) {
            let cf = CostFn::new(&plain(1));
            let pool: Vec<Vec<f64>> = costs.iter().map(|&v| vec![v]).collect();
            let q = build_q(&[0.0], &pool, &cf, lambda, k).unwrap();
            prop_assert!(q.weights.len() <= k);
            prop_assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(q.weights.iter().all(|&w| w >= 0.0));
            let scaled: Vec<Vec<f64>> = costs.iter().map(|&v| vec![v * c]).collect();
            let q2 = build_q(&[0.0], &scaled, &cf, lambda / c, k).unwrap();
            prop_assert_eq!(&q.candidates, &q2.candidates);
            for (a, b) in q.weights.iter().zip(&q2.weights) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
