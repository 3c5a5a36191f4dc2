use collapse_lab::augment::{AmConfig, AugmentStrategy, RateMode};
use collapse_lab::data::{gaussian_toy, LabeledDataset};
use collapse_lab::harness::{evaluate, fit, init_model, FitOptions, OptimConfig};
use collapse_lab::network::checkpoint::params_digest;
use collapse_lab::network::{LrSchedule, Model, ModelSpec, Trainable};
use collapse_lab::{Rng, Tensor};

fn optim(lr: f64, momentum: f64, weight_decay: f64) -> OptimConfig {
    OptimConfig {
        momentum,
        weight_decay,
        schedule: LrSchedule::constant(lr),
    }
}

fn opts<'a>(
    optim: &'a OptimConfig,
    strategy: &'a AugmentStrategy,
    epochs: usize,
    batch_size: usize,
    trainable: Trainable,
) -> FitOptions<'a> {
    FitOptions {
        optim,
        epochs,
        batch_size,
        strategy,
        trainable,
        seed: 5,
    }
}

/// Plain full-batch gradient descent with momentum and weight decay on a
/// `2 → 3 → 2 → 2` MLP, written out by hand.
fn hand_rolled_gd(params: &mut [Vec<f64>], x: &[[f64; 2]], y: &[usize], steps: usize) {
    let (lr, mu, wd) = (0.05, 0.9, 1e-3);
    let mut vel: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
    let n = x.len() as f64;
    for _ in 0..steps {
        let (w1, b1, w2, b2, w3, b3) = (
            &params[0], &params[1], &params[2], &params[3], &params[4], &params[5],
        );
        let mut g: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        for (xi, &yi) in x.iter().zip(y) {
            let mut pre = [0.0; 3];
            for j in 0..3 {
                pre[j] = b1[j] + xi[0] * w1[j] + xi[1] * w1[3 + j];
            }
            let h: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
            let mut z = [0.0; 2];
            for k in 0..2 {
                z[k] = b2[k] + (0..3).map(|j| h[j] * w2[j * 2 + k]).sum::<f64>();
            }
            let mut o = [0.0; 2];
            for c in 0..2 {
                o[c] = b3[c] + (0..2).map(|k| z[k] * w3[k * 2 + c]).sum::<f64>();
            }
            let m = o[0].max(o[1]);
            let e = [(o[0] - m).exp(), (o[1] - m).exp()];
            let s = e[0] + e[1];
            let mut d_o = [e[0] / s, e[1] / s];
            d_o[yi] -= 1.0;
            for v in &mut d_o {
                *v /= n;
            }
            let mut d_z = [0.0; 2];
            for k in 0..2 {
                for c in 0..2 {
                    g[4][k * 2 + c] += z[k] * d_o[c];
                    d_z[k] += w3[k * 2 + c] * d_o[c];
                }
            }
            for c in 0..2 {
                g[5][c] += d_o[c];
            }
            let mut d_h = [0.0; 3];
            for j in 0..3 {
                for k in 0..2 {
                    g[2][j * 2 + k] += h[j] * d_z[k];
                    d_h[j] += w2[j * 2 + k] * d_z[k];
                }
            }
            for k in 0..2 {
                g[3][k] += d_z[k];
            }
            for j in 0..3 {
                let d_pre = if pre[j] > 0.0 { d_h[j] } else { 0.0 };
                g[0][j] += xi[0] * d_pre;
                g[0][3 + j] += xi[1] * d_pre;
                g[1][j] += d_pre;
            }
        }
        for ((p, v), gp) in params.iter_mut().zip(&mut vel).zip(&g) {
            for i in 0..p.len() {
                v[i] = mu * v[i] + gp[i] + wd * p[i];
                p[i] -= lr * v[i];
            }
        }
    }
}

#[test]
fn full_batch_none_matches_hand_rolled_gd() {
    let x = [
        [0.3, -1.2], [1.1, 0.4], [-0.7, 0.9], [0.2, 0.2], [-1.5, -0.3],
        [0.8, -0.6], [-0.1, 1.4], [1.6, 1.0], [-0.9, -1.1], [0.5, 0.7],
    ];
    let y = [0, 1, 1, 0, 0, 1, 1, 1, 0, 0];
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let ds = LabeledDataset::new("ten", Tensor::new(vec![10, 2], flat).unwrap(), y.to_vec(), 2).unwrap();

    let mut model = Model::init(ModelSpec::mlp(2, &[3], 2, 2), &mut Rng::new(3)).unwrap();
    let mut expected: Vec<Vec<f64>> = model.params().iter().map(|p| p.data().to_vec()).collect();
    let o = optim(0.05, 0.9, 1e-3);
    let strategy = AugmentStrategy::None;
    fit(&mut model, &ds, &ds, &opts(&o, &strategy, 25, 10, Trainable::All)).unwrap();
    hand_rolled_gd(&mut expected, &x, &y, 25);

    for (p, want) in model.params().iter().zip(&expected) {
        for (a, b) in p.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn zero_epochs_leave_initialization() {
    let tt = gaussian_toy(3, 20, 2, 0.3, 1).unwrap();
    let mut model = init_model(ModelSpec::mlp(2, &[8], 2, 3), 4).unwrap();
    let before = params_digest(model.params());
    let o = optim(0.1, 0.9, 5e-4);
    let strategy = AugmentStrategy::am_default();
    let history = fit(&mut model, &tt.train, &tt.test, &opts(&o, &strategy, 0, 16, Trainable::All)).unwrap();
    assert!(history.is_empty());
    assert_eq!(params_digest(model.params()), before);
}

#[test]
fn classifier_only_keeps_encoder_bits() {
    let tt = gaussian_toy(4, 50, 3, 0.4, 2).unwrap();
    let mut model = init_model(ModelSpec::mlp(3, &[8, 6], 2, 4), 9).unwrap();
    let k = model.encoder_param_count();
    let encoder = params_digest(&model.params()[..k]);
    let head = params_digest(&model.params()[k..]);
    let o = optim(0.1, 0.9, 5e-4);
    let strategy = AugmentStrategy::None;
    fit(&mut model, &tt.train, &tt.test, &opts(&o, &strategy, 5, 32, Trainable::ClassifierOnly)).unwrap();
    assert_eq!(params_digest(&model.params()[..k]), encoder);
    assert_ne!(params_digest(&model.params()[k..]), head);
}

/// Accuracy of assigning each test point to the nearest training mean.
fn nearest_mean_accuracy(train: &LabeledDataset, test: &LabeledDataset) -> f64 {
    let (c, d) = (train.num_classes(), train.samples().row_len());
    let mut means = vec![vec![0.0; d]; c];
    for i in 0..train.len() {
        let l = train.labels()[i];
        for (m, v) in means[l].iter_mut().zip(train.samples().row(i)) {
            *m += v / train.class_counts()[l] as f64;
        }
    }
    let hits = (0..test.len())
        .filter(|&i| {
            let row = test.samples().row(i);
            let sq = |m: &Vec<f64>| m.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = (0..c).min_by(|&a, &b| sq(&means[a]).total_cmp(&sq(&means[b]))).unwrap();
            best == test.labels()[i]
        })
        .count();
    hits as f64 / test.len() as f64
}

#[test]
fn separable_toy_is_learned() {
    let tt = gaussian_toy(4, 500, 2, 0.1, 0).unwrap();
    let oracle = nearest_mean_accuracy(&tt.train, &tt.test);
    assert!(oracle > 0.99, "toy not separable: {oracle}");
    let mut model = init_model(ModelSpec::mlp(2, &[64, 32], 2, 4), 0).unwrap();
    let o = optim(0.1, 0.9, 5e-4);
    let strategy = AugmentStrategy::None;
    let history = fit(&mut model, &tt.train, &tt.test, &opts(&o, &strategy, 30, 128, Trainable::All)).unwrap();
    let acc = evaluate(&model, &tt.test).unwrap().accuracy;
    assert!(acc > 0.99, "accuracy {acc}, nearest-mean {oracle}");
    assert_eq!(history.last().unwrap().test_acc, acc);
}

#[test]
fn am_first_epoch_uses_unit_rate_and_rate_tracks_accuracy() {
    let tt = gaussian_toy(4, 200, 2, 0.4, 6).unwrap();
    let mut model = init_model(ModelSpec::mlp(2, &[16, 8], 2, 4), 6).unwrap();
    let o = optim(0.05, 0.9, 5e-4);
    let beta = 0.34;
    let strategy = AugmentStrategy::AmMixup(AmConfig {
        beta,
        ..AmConfig::default()
    });
    let h = fit(&mut model, &tt.train, &tt.test, &opts(&o, &strategy, 12, 64, Trainable::All)).unwrap();
    assert_eq!(h[0].lambda_used, 1.0);
    for w in h.windows(2) {
        assert!((w[1].lambda_used - (-beta * w[0].train_acc).exp()).abs() < 1e-15);
    }
    for w in h.windows(3) {
        if w[1].train_acc >= w[0].train_acc {
            assert!(w[2].lambda_used <= w[1].lambda_used);
        }
    }
}

#[test]
fn fixed_rates_are_reported_per_epoch() {
    let tt = gaussian_toy(3, 100, 2, 0.4, 1).unwrap();
    let o = optim(0.05, 0.9, 5e-4);
    let fixed = AugmentStrategy::AmMixup(AmConfig {
        rate_mode: RateMode::Fixed(0.3),
        ..AmConfig::default()
    });
    let mut model = init_model(ModelSpec::mlp(2, &[8], 2, 3), 1).unwrap();
    let h = fit(&mut model, &tt.train, &tt.test, &opts(&o, &fixed, 3, 32, Trainable::All)).unwrap();
    assert!(h.iter().all(|r| r.lambda_used == 0.3));

    let beta = AugmentStrategy::Mixup { alpha: 1.0 };
    let mut model = init_model(ModelSpec::mlp(2, &[8], 2, 3), 1).unwrap();
    let h = fit(&mut model, &tt.train, &tt.test, &opts(&o, &beta, 3, 32, Trainable::All)).unwrap();
    assert!(h.iter().all(|r| r.lambda_used > 0.0 && r.lambda_used < 1.0));
}

#[test]
fn manifold_mixup_trains_cnn() {
    let mut rng = Rng::new(2);
    let n = 24;
    let mut data = Vec::with_capacity(n * 16);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for &l in &labels {
        for p in 0..16 {
            let bright = if (p < 8) == (l == 0) { 1.0 } else { 0.0 };
            data.push(bright + 0.1 * rng.normal());
        }
    }
    let ds = LabeledDataset::new("bars", Tensor::new(vec![n, 1, 4, 4], data).unwrap(), labels, 2).unwrap();
    let spec = ModelSpec {
        encoder: collapse_lab::network::EncoderSpec::CnnVis2d {
            in_channels: 1,
            height: 4,
            width: 4,
            channels: vec![4, 4],
        },
        feature_dim: 2,
        num_classes: 2,
    };
    let mut model = init_model(spec, 3).unwrap();
    let o = optim(0.05, 0.9, 0.0);
    let strategy = AugmentStrategy::ManifoldMixup {
        alpha: 1.0,
        eligible_layers: None,
    };
    let h = fit(&mut model, &ds, &ds, &opts(&o, &strategy, 40, 8, Trainable::All)).unwrap();
    assert!(h.iter().all(|r| r.train_loss.is_finite()));
    assert!(h.last().unwrap().test_acc >= 0.9, "{:?}", h.last());
}

#[test]
fn non_finite_training_is_reported() {
    let tt = gaussian_toy(3, 100, 2, 0.4, 1).unwrap();
    let mut model = init_model(ModelSpec::mlp(2, &[8], 2, 3), 1).unwrap();
    let o = optim(1e6, 0.9, 5e-4);
    let strategy = AugmentStrategy::None;
    let err = fit(&mut model, &tt.train, &tt.test, &opts(&o, &strategy, 20, 32, Trainable::All)).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}
