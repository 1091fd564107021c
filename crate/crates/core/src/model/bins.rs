//! Per-feature bin grids and RBF kernel soft labels.

use serde::{Deserialize, Serialize};

use crate::autodiff::log_sum_exp;
use crate::error::{Error, Result};

/// Width given to the single bin of a constant feature.
pub const DEGENERATE_WIDTH: f64 = 1e-3;
pub const DEFAULT_BINS: usize = 50;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    #[default]
    EqualWidth,
    Quantile,
}

/// Bin centers (ascending) and widths for one encoded coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl FeatureBins {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Log RBF kernel `−u²/2` with `u = (x − μ_k)/w_k` for every bin.
    pub fn log_kernels(&self, x: f64) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(m, w)| {
                let u = (x - m) / w;
                -0.5 * u * u
            })
            .collect()
    }

    /// Kernel ratios over this feature's bins (a simplex vector).
    pub fn soft_label(&self, x: f64) -> Vec<f64> {
        let lk = self.log_kernels(x);
        let z = log_sum_exp(&lk);
        lk.iter().map(|l| (l - z).exp()).collect()
    }

    /// Log of the Gaussian mixture density with bin weights `exp(log_p)`.
    pub fn log_mixture_density(&self, log_p: &[f64], x: f64) -> f64 {
        let terms: Vec<f64> = self
            .log_kernels(x)
            .iter()
            .zip(log_p)
            .zip(&self.widths)
            .map(|((lk, lp), w)| lp + lk - w.ln() - LN_SQRT_2PI)
            .collect();
        log_sum_exp(&terms)
    }

    fn validate(&self) -> Result<()> {
        let ok = !self.centers.is_empty()
            && self.centers.len() == self.widths.len()
            && self.widths.iter().all(|&w| w > 0.0 && w.is_finite())
            && self.centers.windows(2).all(|p| p[0] < p[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("malformed bin grid".into()))
        }
    }
}

/// One [`FeatureBins`] per encoded coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub features: Vec<FeatureBins>,
}

impl BinGrid {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn max_bins(&self) -> usize {
        self.features.iter().map(FeatureBins::len).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.iter().try_for_each(FeatureBins::validate)
    }

    /// Per-feature soft labels for an encoded target row.
    pub fn soft_labels(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.features.iter().zip(x).map(|(f, &v)| f.soft_label(v)).collect()
    }

    /// Offset between the exact negative log-density and the cross-entropy
    /// objective: `NLL ≤ CE + offset`, valid when each feature's bins share
    /// one width (equal-width grids).
    pub fn bound_offset(&self, x: &[f64]) -> f64 {
        self.features
            .iter()
            .zip(x)
            .map(|(f, &v)| f.widths[0].ln() + LN_SQRT_2PI - log_sum_exp(&f.log_kernels(v)))
            .sum()
    }
}

/// Fits bins on the pool rows, one grid per encoded coordinate.
pub fn fit_bins(pool: &[Vec<f64>], n_bins: usize, scheme: Binning) -> Result<BinGrid> {
    let first = pool
        .first()
        .ok_or_else(|| Error::Invalid("cannot fit bins on an empty pool".into()))?;
    if n_bins == 0 {
        return Err(Error::Invalid("bin count must be positive".into()));
    }
    let features = (0..first.len())
        .map(|j| {
            let mut col: Vec<f64> = pool.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let (lo, hi) = (col[0], col[col.len() - 1]);
            if hi - lo <= 1e-12 {
                return FeatureBins {
                    centers: vec![lo],
                    widths: vec![DEGENERATE_WIDTH],
                };
            }
            match scheme {
                Binning::EqualWidth => equal_width(lo, hi, n_bins),
                Binning::Quantile => quantile(&col, n_bins),
            }
        })
        .collect();
    let grid = BinGrid { features };
    grid.validate()?;
    Ok(grid)
}

fn equal_width(lo: f64, hi: f64, n: usize) -> FeatureBins {
    let w = (hi - lo) / n as f64;
    FeatureBins {
        centers: (0..n).map(|k| lo + (k as f64 + 0.5) * w).collect(),
        widths: vec![w; n],
    }
}

fn quantile(sorted: &[f64], n: usize) -> FeatureBins {
    let last = sorted.len() - 1;
    let mut edges: Vec<f64> = (0..=n).map(|i| sorted[(i * last + n / 2) / n]).collect();
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if edges.len() < 2 {
        return equal_width(sorted[0], sorted[last], 1);
    }
    FeatureBins {
        centers: edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect(),
        widths: edges.windows(2).map(|e| e[1] - e[0]).collect(),
    }
}
