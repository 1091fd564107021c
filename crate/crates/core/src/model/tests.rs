use rand::Rng as _;

use super::*;
use crate::autodiff::log_sum_exp;
use crate::data::Feature;
use crate::rng::{rng_from_seed, Rng};

fn schema(d: usize) -> FeatureSchema {
    FeatureSchema::new(
        (0..d).map(|i| Feature::continuous(&format!("f{i}"), true)).collect(),
        "1",
    )
    .unwrap()
}

fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig {
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
    }
}

fn random_rows(n: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

fn model(d: usize, bins: usize, conditional: bool, seed: u64) -> RecourseModel {
    let mut rng = rng_from_seed(seed ^ 0xabc);
    let pool = random_rows(64, d, &mut rng);
    let cfg = TrainConfig {
        n_bins: bins,
        seed,
        ..TrainConfig::toy()
    };
    let grid = fit_bins(&pool, bins, Binning::EqualWidth).unwrap();
    RecourseModel::new(&schema(d), grid, &cfg, conditional).unwrap()
}

#[test]
fn heads_are_simplices() {
    let m = model(3, 7, true, 1);
    let mut rng = rng_from_seed(2);
    let (xs, ys) = (random_rows(5, 3, &mut rng), random_rows(5, 3, &mut rng));
    for row in m.log_probs(&xs, &ys).unwrap() {
        for lp in row {
            assert_eq!(lp.len(), 7);
            let s: f64 = lp.iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn decoder_is_causal() {
    let m = model(4, 5, true, 3);
    let mut rng = rng_from_seed(4);
    let xs = random_rows(1, 4, &mut rng);
    let ys = random_rows(1, 4, &mut rng);
    let base = m.log_probs(&xs, &ys).unwrap();
    for changed in 0..4 {
        let mut ys2 = ys.clone();
        ys2[0][changed] += 0.37;
        let other = m.log_probs(&xs, &ys2).unwrap();
        for j in 0..=changed {
            assert_eq!(base[0][j], other[0][j], "feature {j} saw target {changed}");
        }
        if changed + 1 < 4 {
            assert_ne!(base[0][changed + 1], other[0][changed + 1]);
        }
    }
}

#[test]
fn encoder_is_consulted() {
    let m = model(3, 5, true, 5);
    let mut rng = rng_from_seed(6);
    let xs = random_rows(1, 3, &mut rng);
    let ys = random_rows(1, 3, &mut rng);
    let mut xs2 = xs.clone();
    xs2[0][1] += 0.5;
    let a = m.log_probs(&xs, &ys).unwrap();
    let b = m.log_probs(&xs2, &ys).unwrap();
    assert!(a[0].iter().zip(&b[0]).any(|(p, q)| p != q));
}

#[test]
fn unconditional_ignores_query() {
    let m = model(2, 5, false, 7);
    let ys = vec![vec![0.2, 0.3]];
    let a = m.log_probs(&[vec![0.0, 0.0]], &ys).unwrap();
    let b = m.log_probs(&[vec![0.9, 0.9]], &ys).unwrap();
    assert_eq!(a, b);
}

#[test]
fn loss_matches_manual_cross_entropy() {
    let m = model(2, 6, true, 8);
    let mut rng = rng_from_seed(9);
    let (xs, ys) = (random_rows(4, 2, &mut rng), random_rows(4, 2, &mut rng));
    let lp = m.log_probs(&xs, &ys).unwrap();
    let manual: f64 = lp
        .iter()
        .zip(&ys)
        .map(|(row, y)| {
            row.iter()
                .zip(m.grid().soft_labels(y))
                .map(|(l, q)| -q.iter().zip(l).map(|(a, b)| a * b).sum::<f64>())
                .sum::<f64>()
        })
        .sum::<f64>()
        / 4.0;
    assert!((m.loss(&xs, &ys).unwrap() - manual).abs() < 1e-10);
}

#[test]
fn cross_entropy_minimized_at_soft_label() {
    let f = FeatureBins {
        centers: vec![0.1, 0.3, 0.5, 0.7],
        widths: vec![0.2; 4],
    };
    let q = f.soft_label(0.42);
    let entropy: f64 = -q.iter().map(|v| v * v.ln()).sum::<f64>();
    let ce = |logp: &[f64]| -q.iter().zip(logp).map(|(a, b)| a * b).sum::<f64>();
    let at_q: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    assert!((ce(&at_q) - entropy).abs() < 1e-12);
    let mut rng = rng_from_seed(1);
    for _ in 0..100 {
        let raw: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let z = log_sum_exp(&raw);
        let logp: Vec<f64> = raw.iter().map(|r| r - z).collect();
        assert!(ce(&logp) >= entropy - 1e-12);
    }
}

#[test]
fn single_bin_features_give_zero_loss() {
    let pool = vec![vec![0.4, 0.6]; 5];
    let grid = fit_bins(&pool, 50, Binning::EqualWidth).unwrap();
    let m = RecourseModel::new(&schema(2), grid, &tiny_config(0), true).unwrap();
    assert_eq!(m.loss(&pool, &pool).unwrap(), 0.0);
}

#[test]
fn objective_bounds_exact_nll() {
    let m = model(3, 10, true, 11);
    let mut rng = rng_from_seed(12);
    for _ in 0..20 {
        let xs = random_rows(1, 3, &mut rng);
        let ys = random_rows(1, 3, &mut rng);
        let nll = -m.log_density(&ys[0], &xs[0]).unwrap();
        let ce = m.loss(&xs, &ys).unwrap();
        let offset = m.grid().bound_offset(&ys[0]);
        assert!(nll <= ce + offset + 1e-9, "nll {nll} ce {ce} offset {offset}");
    }
}

#[test]
fn uniform_heads_give_flat_interior_density() {
    let mut m = model(1, 20, true, 13);
    for name in ["head.w", "head.b"] {
        let id = m.params().by_name(name).unwrap();
        m.params_mut().get_mut(id).data_mut().fill(0.0);
    }
    let f = m.grid().features[0].clone();
    let (lo, hi) = (f.centers[3], f.centers[16]);
    let dens: Vec<f64> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            m.log_density(&[x], &[0.5]).unwrap().exp()
        })
        .collect();
    let (mn, mx) = dens
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!((mx - mn) / mx < 0.01, "{mn} {mx}");
}

#[test]
fn first_feature_density_integrates_to_one() {
    let m = model(2, 15, true, 14);
    let q = vec![vec![0.3, 0.8]];
    let lp = m.log_probs(&q, &q).unwrap();
    let f = &m.grid().features[0];
    let (lo, hi, n) = (
        f.centers[0] - 10.0 * f.widths[0],
        f.centers[14] + 10.0 * f.widths[0],
        20_000,
    );
    let h = (hi - lo) / n as f64;
    let total: f64 = (0..=n)
        .map(|i| f.log_mixture_density(&lp[0][0], lo + i as f64 * h).exp())
        .sum::<f64>()
        * h;
    assert!((total - 1.0).abs() < 1e-2, "{total}");
}

#[test]
fn density_rises_toward_the_mode() {
    let m = model(1, 12, true, 15);
    let lp = m.log_probs(&[vec![0.5]], &[vec![0.5]]).unwrap();
    let f = &m.grid().features[0];
    let k = crate::data::argmax_first(&lp[0][0]);
    let mu = f.centers[k];
    let far = mu + 0.3 * f.widths[k];
    let near = mu + 0.1 * f.widths[k];
    assert!(m.log_density(&[near], &[0.5]).unwrap() > m.log_density(&[far], &[0.5]).unwrap());
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let r = super::gradcheck::loss_gradient_check(100, 20, 1e-4);
    assert!(r.max_rel_error < 1e-4, "{:?}", r.worst);
    assert!(r.kinked * 20 <= r.checked, "{} kinked of {}", r.kinked, r.checked);
}

#[test]
fn checkpoint_round_trip_and_fingerprint() {
    let m = model(2, 5, true, 16);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let back = RecourseModel::load(&path, Some(&schema(2))).unwrap();
    let q = vec![vec![0.1, 0.9]];
    assert_eq!(m.log_probs(&q, &q).unwrap(), back.log_probs(&q, &q).unwrap());
    let path2 = dir.path().join("m2.json");
    back.save(&path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    let err = RecourseModel::load(&path, Some(&schema(3))).unwrap_err();
    assert!(matches!(err, Error::Fingerprint { .. }));
}

#[test]
fn tiny_training_is_deterministic_and_learns() {
    let s = schema(2);
    let mut rng = rng_from_seed(20);
    let rows = random_rows(120, 2, &mut rng);
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.5)).collect();
    let d = Dataset::new(s, rows, Some(labels)).unwrap();
    let part = Partition {
        negatives: (0..120).filter(|&i| d.rows[i][0] <= 0.5).collect(),
        pool: (0..120).filter(|&i| d.rows[i][0] > 0.5).collect(),
    };
    let cfg = TrainConfig {
        epochs: 15,
        n_bins: 10,
        ..tiny_config(3)
    };
    let (a, summary) = train_with_partition(&d, &part, &cfg).unwrap();
    let (b, _) = train_with_partition(&d, &part, &cfg).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(summary.losses.len(), 15);
    assert!(summary.losses[14] < summary.losses[0]);
}
