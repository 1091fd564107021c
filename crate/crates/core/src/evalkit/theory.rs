//! Consistency and convergence-rate checks of the pairing estimator on a
//! 2D task with a closed-form positive-class density.
//!
//! P(X|y⁺) is an isotropic Gaussian mixture truncated to the unit square,
//! the gold boundary is `x₀ = threshold`, and the target expectation
//! E_R[x⁺|x] is integrated with composite Simpson over a uniform grid.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::autodiff::sigmoid;
use crate::data::{Feature, FeatureSchema};
use crate::error::Result;
use crate::pairing::{build_q, CostFn};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 2],
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryOracle {
    pub components: Vec<Component>,
    /// Gold is `sigmoid(steepness·(x₀ − threshold))`.
    pub threshold: f64,
    pub steepness: f64,
    pub lambda: f64,
    pub query: [f64; 2],
    /// Nodes per axis over [0,1]; must be odd.
    pub grid: usize,
}

impl Default for TheoryOracle {
    fn default() -> Self {
        Self {
            components: vec![
                Component {
                    weight: 0.5,
                    mean: [0.35, 0.65],
                    std: 0.15,
                },
                Component {
                    weight: 0.5,
                    mean: [0.7, 0.3],
                    std: 0.12,
                },
            ],
            threshold: 0.5,
            steepness: 20.0,
            lambda: 5.0,
            query: [0.2, 0.2],
            grid: 201,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Mean and mass of N(μ, s²) truncated to [0,1].
fn truncated_moments(mu: f64, s: f64) -> (f64, f64) {
    let n = std_normal();
    let (a, b) = ((0.0 - mu) / s, (1.0 - mu) / s);
    let mass = n.cdf(b) - n.cdf(a);
    (mu + s * (n.pdf(a) - n.pdf(b)) / mass, mass)
}

fn simpson_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0 => 1.0,
            i if i == n - 1 => 1.0,
            i if i % 2 == 1 => 4.0,
            _ => 2.0,
        })
        .collect()
}

impl TheoryOracle {
    fn masses(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.weight * truncated_moments(c.mean[0], c.std).1 * truncated_moments(c.mean[1], c.std).1)
            .collect()
    }

    /// Truncated mixture density on the unit square (closed-form normalizer).
    pub fn density(&self, x: [f64; 2]) -> f64 {
        if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
            return 0.0;
        }
        let z: f64 = self.masses().iter().sum();
        let n = std_normal();
        self.components
            .iter()
            .map(|c| c.weight * n.pdf((x[0] - c.mean[0]) / c.std) * n.pdf((x[1] - c.mean[1]) / c.std) / (c.std * c.std))
            .sum::<f64>()
            / z
    }

    /// Mean of P(X|y⁺) from the error-function moments.
    pub fn analytic_mean(&self) -> [f64; 2] {
        let masses = self.masses();
        let z: f64 = masses.iter().sum();
        let mut m = [0.0; 2];
        for (c, w) in self.components.iter().zip(&masses) {
            for (d, md) in m.iter_mut().enumerate() {
                *md += w / z * truncated_moments(c.mean[d], c.std).0;
            }
        }
        m
    }

    pub fn gold(&self, x: [f64; 2]) -> f64 {
        sigmoid(self.steepness * (x[0] - self.threshold))
    }

    fn node(&self, i: usize) -> f64 {
        i as f64 / (self.grid - 1) as f64
    }

    /// Simpson integral of `f` over the nodes `x0_from..grid` × all of x₁.
    fn integrate(&self, x0_from: usize, f: impl Fn([f64; 2]) -> f64) -> f64 {
        let h = 1.0 / (self.grid - 1) as f64;
        let wa = simpson_weights(self.grid - x0_from);
        let wb = simpson_weights(self.grid);
        let mut s = 0.0;
        for (ia, a) in wa.iter().enumerate() {
            for (ib, b) in wb.iter().enumerate() {
                s += a * b * f([self.node(x0_from + ia), self.node(ib)]);
            }
        }
        s * h * h / 9.0
    }

    /// Grid integral of the density over the square; ≈ 1.
    pub fn normalization(&self) -> f64 {
        self.integrate(0, |x| self.density(x))
    }

    /// Second-moment spread of P(X|y⁺) per coordinate, by quadrature.
    pub fn std(&self) -> [f64; 2] {
        let m = self.analytic_mean();
        [0, 1].map(|d| self.integrate(0, |x| (x[d] - m[d]).powi(2) * self.density(x)).sqrt())
    }

    fn boundary_node(&self) -> usize {
        (self.threshold * (self.grid - 1) as f64).round() as usize
    }

    /// E_R[x⁺|x] with R ∝ exp(−λ‖x − x⁺‖₁)·P(x⁺|y⁺)·1[gold(x⁺) > ½],
    /// integrating only over the favorable side of the boundary.
    pub fn target_mean(&self) -> [f64; 2] {
        let from = self.boundary_node();
        let r = |x: [f64; 2]| {
            (-self.lambda * ((x[0] - self.query[0]).abs() + (x[1] - self.query[1]).abs())).exp() * self.density(x)
        };
        let z = self.integrate(from, r);
        [0, 1].map(|d| self.integrate(from, |x| x[d] * r(x)) / z)
    }

    /// Rejection draws from the truncated mixture.
    pub fn sample(&self, n: usize, rng: &mut crate::rng::Rng) -> Vec<[f64; 2]> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let mut u = rng.random::<f64>() * total;
            let c = self
                .components
                .iter()
                .find(|c| {
                    u -= c.weight;
                    u < 0.0
                })
                .unwrap_or(&self.components[self.components.len() - 1]);
            let x = [0, 1].map(|d| c.mean[d] + c.std * rng.sample::<f64, _>(StandardNormal));
            if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                out.push(x);
            }
        }
        out
    }

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![Feature::continuous("x0", true), Feature::continuous("x1", true)],
            "1",
        )
        .expect("static schema")
    }

    /// Self-normalized estimate E_Q[x⁺|x] over the pool members the gold
    /// accepts (all of them when `gate` is false).
    pub fn estimate(&self, pool: &[[f64; 2]], lambda: f64, gate: bool) -> Result<[f64; 2]> {
        let kept: Vec<Vec<f64>> = pool
            .iter()
            .filter(|p| !gate || self.gold(**p) > 0.5)
            .map(|p| p.to_vec())
            .collect();
        let cost = CostFn::new(&Self::schema());
        let q = build_q(&self.query, &kept, &cost, lambda, kept.len().max(1))?;
        let mut m = [0.0; 2];
        for (&i, &w) in q.candidates.iter().zip(&q.weights) {
            m[0] += w * kept[i][0];
            m[1] += w * kept[i][1];
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub target: [f64; 2],
    pub normalization: f64,
    /// Mean squared error ‖E_Q − E_R‖² per pool size.
    pub mse: Vec<f64>,
    /// Mean absolute error ‖E_Q − E_R‖ per pool size.
    pub mean_error: Vec<f64>,
    pub slope: f64,
}

impl TheoryReport {
    pub fn mse_decreasing(&self) -> bool {
        self.mse.windows(2).all(|w| w[1] < w[0])
    }
}

pub const THEORY_SIZES: [usize; 4] = [100, 400, 1600, 6400];

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn theory_consistency(oracle: &TheoryOracle, sizes: &[usize], trials: usize, seed: u64) -> Result<TheoryReport> {
    let target = oracle.target_mean();
    let streams = SeedStream::new(seed);
    let mut mse = Vec::with_capacity(sizes.len());
    let mut mean_error = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut rng = streams.rng(&format!("theory-{n}"));
        let (mut se, mut ae) = (0.0, 0.0);
        for _ in 0..trials {
            let pool = oracle.sample(n, &mut rng);
            let e = oracle.estimate(&pool, oracle.lambda, true)?;
            let sq = (e[0] - target[0]).powi(2) + (e[1] - target[1]).powi(2);
            se += sq;
            ae += sq.sqrt();
        }
        mse.push(se / trials as f64);
        mean_error.push(ae / trials as f64);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    Ok(TheoryReport {
        sizes: sizes.to_vec(),
        trials,
        target,
        normalization: oracle.normalization(),
        slope: loglog_slope(&xs, &mse),
        mse,
        mean_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateReport {
    pub n: usize,
    pub estimate: [f64; 2],
    pub pool_mean: [f64; 2],
    pub analytic_mean: [f64; 2],
    /// 3σ/√N per coordinate.
    pub tolerance: [f64; 2],
}

impl DegenerateReport {
    pub fn equals_pool_mean(&self) -> bool {
        (0..2).all(|d| (self.estimate[d] - self.pool_mean[d]).abs() <= 1e-12)
    }

    pub fn within_tolerance(&self) -> bool {
        (0..2).all(|d| (self.estimate[d] - self.analytic_mean[d]).abs() <= self.tolerance[d])
    }
}

/// λ = 0 with every pool member accepted: the estimator is the pool mean.
pub fn degenerate_check(oracle: &TheoryOracle, n: usize, seed: u64) -> Result<DegenerateReport> {
    let mut rng = SeedStream::new(seed).rng("theory-degenerate");
    let pool = oracle.sample(n, &mut rng);
    let estimate = oracle.estimate(&pool, 0.0, false)?;
    let pool_mean = [0, 1].map(|d| pool.iter().map(|p| p[d]).sum::<f64>() / n as f64);
    let sd = oracle.std();
    Ok(DegenerateReport {
        n,
        estimate,
        pool_mean,
        analytic_mean: oracle.analytic_mean(),
        tolerance: sd.map(|s| 3.0 * s / (n as f64).sqrt()),
    })
}
