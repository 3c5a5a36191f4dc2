use proptest::prelude::*;

use collapse_lab::augment::{
    am_lambda, am_loss, am_mix_features, am_targets, manifold_mix_layer, mixup_batch, mixup_loss,
    one_sided_labels, random_pairing,
};
use collapse_lab::data::one_hot;
use collapse_lab::numerics::{ops, Rng};
use collapse_lab::Tensor;

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

#[test]
fn beta_draws_are_symmetric() {
    for alpha in [0.2, 1.0, 2.0] {
        let mut rng = Rng::new(17);
        let draws: Vec<f64> = (0..100_000).map(|_| rng.beta_symmetric(alpha).unwrap()).collect();
        let mirrored = draws.iter().map(|v| 1.0 - v).collect();
        let d = ks(draws.clone(), mirrored);
        assert!(d < 0.02, "alpha {alpha}: KS {d}");
        assert!(draws.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn beta_one_is_uniform() {
    let mut rng = Rng::new(4);
    let draws: Vec<f64> = (0..100_000).map(|_| rng.beta_symmetric(1.0).unwrap()).collect();
    let grid: Vec<f64> = (0..100_000).map(|i| (i as f64 + 0.5) / 100_000.0).collect();
    let d = ks(draws, grid);
    assert!(d < 0.01, "KS vs U(0,1) {d}");
}

#[test]
fn manifold_layers_are_uniform() {
    let mut rng = Rng::new(8);
    let eligible = [0, 1, 2, 3];
    let n = 100_000;
    let mut hits = [0usize; 4];
    for _ in 0..n {
        hits[manifold_mix_layer(&mut rng, &eligible).unwrap()] += 1;
    }
    for h in hits {
        let f = h as f64 / n as f64;
        assert!((f - 0.25).abs() <= 0.01, "{hits:?}");
    }
}

#[test]
fn pairings_are_permutations() {
    let mut rng = Rng::new(1);
    for n in [1, 2, 7, 128] {
        let mut p = random_pairing(&mut rng, n);
        p.sort_unstable();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn below_half_rate_takes_partner_label() {
    let z = Tensor::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
    let b = am_mix_features(&z, &[0, 1], 2, 0.3, &[1, 0], true).unwrap();
    assert_eq!(b.target.data(), &[0.0, 1.0, 1.0, 0.0]);
    for v in b.inputs_or_features.row(0) {
        assert!((v - 1.4).abs() < 1e-15);
    }
    assert_eq!(b.lambda_used, 0.3);
}

#[test]
fn scheduled_rate_range() {
    for beta in [0.0, 0.34, 0.67] {
        for i in 0..=100 {
            let l = am_lambda(i as f64 / 100.0, beta).unwrap();
            assert!((0.5117..=1.0).contains(&l), "{beta} {i} {l}");
        }
    }
    assert!(am_lambda(1.2, 0.34).is_err());
    assert!(am_lambda(0.5, -1.0).is_err());
}

fn logits_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..6, 2usize..6).prop_flat_map(|(n, c)| {
        (Just(n), Just(c), prop::collection::vec(-20.0f64..20.0, n * c))
    })
}

proptest! {
    #[test]
    fn one_sided_labels_pick_dominant_side(
        labels in prop::collection::vec(0usize..5, 1..20),
        lambda in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let pairing = random_pairing(&mut rng, labels.len());
        let out = one_sided_labels(&labels, &pairing, lambda);
        for i in 0..labels.len() {
            let want = if lambda >= 0.5 { labels[i] } else { labels[pairing[i]] };
            prop_assert_eq!(out[i], want);
        }
        let t = am_targets(&labels, 5, lambda, &pairing, true).unwrap();
        prop_assert_eq!(t, one_hot(&out, 5));
    }

    #[test]
    fn mixup_loss_equals_soft_target_loss(
        (n, c, raw) in logits_strategy(),
        lambda in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let logits = Tensor::new(vec![n, c], raw).unwrap();
        let mut rng = Rng::new(seed);
        let yi: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let yj: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let (ti, tj) = (one_hot(&yi, c), one_hot(&yj, c));
        let pair = mixup_loss(&logits, &ti, &tj, lambda).unwrap();
        let soft: Vec<f64> = ti.data().iter().zip(tj.data()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let (direct, _) = ops::softmax_xent(&logits, &Tensor::new(vec![n, c], soft).unwrap()).unwrap();
        prop_assert!((pair - direct).abs() < 1e-12);
    }

    #[test]
    fn mixup_batch_is_convex(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..10),
        lambda in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let n = rows.len();
        let x = Tensor::from_rows(&rows).unwrap();
        let y = one_hot(&(0..n).map(|i| i % 3).collect::<Vec<_>>(), 3);
        let pairing = random_pairing(&mut Rng::new(seed), n);
        let b = mixup_batch(&x, &y, lambda, &pairing).unwrap();
        for i in 0..n {
            for k in 0..3 {
                let want = lambda * rows[i][k] + (1.0 - lambda) * rows[pairing[i]][k];
                prop_assert!((b.inputs_or_features.row(i)[k] - want).abs() < 1e-12);
            }
            let s: f64 = b.target.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn am_loss_rejects_soft_targets((n, c, raw) in logits_strategy(), w in 0.01f64..0.99) {
        let logits = Tensor::new(vec![n, c], raw).unwrap();
        let mut t = one_hot(&vec![0; n], c);
        t.data_mut()[0] = w;
        t.data_mut()[1] = 1.0 - w;
        prop_assert!(am_loss(&logits, &t).is_err());
    }
}
