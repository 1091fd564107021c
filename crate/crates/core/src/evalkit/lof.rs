//! Local outlier factor with tie-inclusive k-neighborhoods, scored in
//! novelty mode against a fixed reference set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NEIGHBORS: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 1.5;

/// Guards the reciprocal when all neighbors coincide.
const LRD_EPS: f64 = 1e-10;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fitted reference set with cached k-distances and reachability densities.
#[derive(Debug, Clone)]
pub struct Lof {
    points: Vec<Vec<f64>>,
    k: usize,
    k_dist: Vec<f64>,
    lrd: Vec<f64>,
}

impl Lof {
    pub fn fit(points: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        if k == 0 || points.len() <= k {
            return Err(Error::Invalid(format!(
                "LOF needs k ≥ 1 and more than k reference points (k = {k}, n = {})",
                points.len()
            )));
        }
        let n = points.len();
        let neighborhoods: Vec<(f64, Vec<(usize, f64)>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let d: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, dist(&points[i], &points[j])))
                    .collect();
                neighborhood(d, k)
            })
            .collect();
        let k_dist: Vec<f64> = neighborhoods.iter().map(|(kd, _)| *kd).collect();
        let lrd = neighborhoods.iter().map(|(_, nb)| reach_density(nb, &k_dist)).collect();
        Ok(Self { points, k, k_dist, lrd })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// LOF of a query that is not itself part of the reference set.
    pub fn score(&self, x: &[f64]) -> f64 {
        let d: Vec<(usize, f64)> = self.points.iter().enumerate().map(|(j, p)| (j, dist(x, p))).collect();
        let (_, nb) = neighborhood(d, self.k);
        let own = reach_density(&nb, &self.k_dist);
        nb.iter().map(|&(j, _)| self.lrd[j]).sum::<f64>() / nb.len() as f64 / own
    }

    /// LOF of reference point `i` against the others.
    pub fn member_score(&self, i: usize) -> f64 {
        let d: Vec<(usize, f64)> = (0..self.points.len())
            .filter(|&j| j != i)
            .map(|j| (j, dist(&self.points[i], &self.points[j])))
            .collect();
        let (_, nb) = neighborhood(d, self.k);
        nb.iter().map(|&(j, _)| self.lrd[j]).sum::<f64>() / nb.len() as f64 / self.lrd[i]
    }
}

/// k-distance and every candidate within it.
fn neighborhood(mut d: Vec<(usize, f64)>, k: usize) -> (f64, Vec<(usize, f64)>) {
    d.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1));
    let kd = d[k - 1].1;
    d.retain(|&(_, v)| v <= kd);
    (kd, d)
}

fn reach_density(nb: &[(usize, f64)], k_dist: &[f64]) -> f64 {
    let mean = nb.iter().map(|&(j, d)| d.max(k_dist[j])).sum::<f64>() / nb.len() as f64;
    1.0 / (mean + LRD_EPS)
}

/// Per-class LOF references; a point is an inlier of a class when its
/// score against that class's reference set is at most `threshold`.
#[derive(Debug, Clone)]
pub struct LofModel {
    classes: [Option<Lof>; 2],
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LofConfig {
    pub k: usize,
    pub threshold: f64,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_NEIGHBORS,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl LofModel {
    /// Splits `rows` by `labels` (typically the gold's predictions).
    pub fn fit(rows: &[Vec<f64>], labels: &[u8], cfg: &LofConfig) -> Result<Self> {
        let fit_class = |c: u8| {
            let pts: Vec<Vec<f64>> = rows
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r.clone())
                .collect();
            if pts.len() > cfg.k {
                Lof::fit(pts, cfg.k).map(Some)
            } else {
                Ok(None)
            }
        };
        let classes = [fit_class(0)?, fit_class(1)?];
        if classes[1].is_none() {
            return Err(Error::Invalid(format!(
                "favorable class needs more than {} reference points",
                cfg.k
            )));
        }
        Ok(Self {
            classes,
            threshold: cfg.threshold,
        })
    }

    pub fn class(&self, c: u8) -> Option<&Lof> {
        self.classes.get(c as usize).and_then(Option::as_ref)
    }

    /// Score against the favorable class.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.classes[1].as_ref().expect("fitted").score(x)
    }

    pub fn is_inlier(&self, x: &[f64]) -> bool {
        self.score(x) <= self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    /// Breunig's definitions evaluated literally, without caching.
    fn brute_lof(reference: &[Vec<f64>], x: &[f64], k: usize, member: Option<usize>) -> f64 {
        let others = |p: &[f64], skip: Option<usize>| -> Vec<(usize, f64)> {
            reference
                .iter()
                .enumerate()
                .filter(|(j, _)| Some(*j) != skip)
                .map(|(j, q)| (j, dist(p, q)))
                .collect()
        };
        let k_distance = |p: &[f64], skip: Option<usize>| {
            let mut d: Vec<f64> = others(p, skip).iter().map(|t| t.1).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        };
        let neighbors = |p: &[f64], skip: Option<usize>| {
            let kd = k_distance(p, skip);
            others(p, skip).into_iter().filter(|t| t.1 <= kd).collect::<Vec<_>>()
        };
        let lrd = |p: &[f64], skip: Option<usize>| {
            let nb = neighbors(p, skip);
            let s: f64 = nb.iter().map(|&(j, d)| d.max(k_distance(&reference[j], Some(j)))).sum();
            1.0 / (s / nb.len() as f64 + LRD_EPS)
        };
        let nb = neighbors(x, member);
        let mean: f64 = nb.iter().map(|&(j, _)| lrd(&reference[j], Some(j))).sum::<f64>() / nb.len() as f64;
        mean / lrd(x, member)
    }

    #[test]
    fn duplicated_point_scores_one() {
        let x = vec![0.3, 0.7];
        let lof = Lof::fit(vec![x.clone(); 6], 5).unwrap();
        assert_eq!(lof.score(&x), 1.0);
    }

    #[test]
    fn lattice_interior_near_one() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1]).collect();
        let lof = Lof::fit(pts, 5).unwrap();
        let s = lof.member_score(25);
        assert!((s - 1.0).abs() < 0.05, "{s}");
        assert!((lof.score(&[2.55]) - 1.0).abs() < 0.05);
    }

    #[test]
    fn isolated_point_is_outlier() {
        let mut rng = rng_from_seed(3);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.random::<f64>() * 0.1, rng.random::<f64>() * 0.1])
            .collect();
        let lof = Lof::fit(pts, 5).unwrap();
        assert!(lof.score(&[2.0, 2.0]) > 1.5);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rng_from_seed(11);
        for trial in 0..50 {
            let n = rng.random_range(7..=200);
            let dim = rng.random_range(1..=3);
            // Coarse lattice coordinates make distance ties common.
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(0..8) as f64 / 4.0).collect())
                .collect();
            let k = rng.random_range(1..=5);
            let lof = Lof::fit(pts.clone(), k).unwrap();
            for i in (0..n).step_by(17) {
                let (a, b) = (lof.member_score(i), brute_lof(&pts, &pts[i], k, Some(i)));
                assert!(
                    (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                    "trial {trial} member {i}: {a} vs {b}"
                );
            }
            for _ in 0..4 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0).collect();
                let (a, b) = (lof.score(&q), brute_lof(&pts, &q, k, None));
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "trial {trial}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(Lof::fit(vec![vec![0.0]; 5], 5).is_err());
        assert!(Lof::fit(vec![vec![0.0]; 5], 0).is_err());
    }

    #[test]
    fn class_conditional_reference() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 20) as f64 * 0.05 + if i < 20 { 0.0 } else { 5.0 }])
            .collect();
        let labels: Vec<u8> = (0..40).map(|i| (i >= 20) as u8).collect();
        let m = LofModel::fit(&rows, &labels, &LofConfig::default()).unwrap();
        assert!(m.is_inlier(&[5.5]));
        assert!(!m.is_inlier(&[0.5]));
        assert!(LofModel::fit(&rows, &[0; 40], &LofConfig::default()).is_err());
    }
}
