//! Finite-difference check of the full training objective with respect to
//! every kind of transformer parameter.

use rand::Rng as _;

use super::{fit_bins, Binning, NetConfig, RecourseModel, TrainConfig};
use crate::autodiff::Tape;
use crate::data::{Feature, FeatureSchema};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradReport {
    pub seeds: u64,
    /// Coordinates compared against the analytic gradient.
    pub checked: usize,
    /// Coordinates skipped because a relu kink lies within the stencil.
    pub kinked: usize,
    pub max_rel_error: f64,
    /// First offending coordinate, if any exceeded `tol`.
    pub worst: Option<String>,
}

fn rows(n: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Five-point central stencil on `coords` random parameters per seed. A
/// coordinate whose estimates at steps `h` and `h/10` disagree is near a
/// relu kink, where the derivative is one-sided; it is counted, not compared.
pub fn loss_gradient_check(seeds: u64, coords: usize, tol: f64) -> LossGradReport {
    const H: f64 = 1e-4;
    let schema = FeatureSchema::new(
        vec![Feature::continuous("f0", true), Feature::continuous("f1", true)],
        "1",
    )
    .expect("static schema");
    let mut report = LossGradReport {
        seeds,
        checked: 0,
        kinked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for seed in 0..seeds {
        let mut rng = rng_from_seed(1000 + seed);
        let pool = rows(16, 2, &mut rng);
        let grid = fit_bins(&pool, 3, Binning::EqualWidth).expect("pool is non-empty");
        let cfg = TrainConfig {
            net: NetConfig {
                embed: 4,
                heads: 2,
                ffn: 4,
                enc_layers: 1,
                dec_layers: 1,
            },
            n_bins: 3,
            seed,
            ..TrainConfig::toy()
        };
        let mut m = RecourseModel::new(&schema, grid, &cfg, true).expect("valid config");
        let xs = rows(3, 2, &mut rng);
        let ys = rows(3, 2, &mut rng);

        let mut t = Tape::new();
        let p = m.params.bind(&mut t);
        let loss = m.loss_on_tape(&mut t, &p, &xs, &ys).expect("loss builds");
        let mut grads = t.backward(loss).expect("scalar loss");
        let analytic = m.params.gradients(&p, &mut grads);

        let ids: Vec<_> = m.params.ids().collect();
        for _ in 0..coords {
            let id = ids[rng.random_range(0..ids.len())];
            let k = rng.random_range(0..m.params.get(id).len());
            let orig = m.params.get(id).data()[k];
            let mut at = |delta: f64| {
                m.params.get_mut(id).data_mut()[k] = orig + delta;
                let v = m.loss(&xs, &ys).expect("loss evaluates");
                m.params.get_mut(id).data_mut()[k] = orig;
                v
            };
            let mut stencil = |h: f64| (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            let wide = stencil(H);
            let narrow = stencil(H / 10.0);
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
            if rel(wide, narrow) > 1e-5 {
                report.kinked += 1;
                continue;
            }
            let a = analytic[id.0][k];
            let err = rel(a, wide);
            if err >= tol && report.worst.is_none() {
                report.worst = Some(format!("seed {seed} `{}`[{k}]: {a} vs {wide}", m.params.name(id)));
            }
            report.max_rel_error = report.max_rel_error.max(err);
            report.checked += 1;
        }
    }
    report
}
