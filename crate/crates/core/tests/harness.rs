use std::path::Path;
use std::process::Command;

use collapse_lab::augment::{AmConfig, AugmentStrategy, RateMode};
use collapse_lab::data::{io, CoarseMap};
use collapse_lab::harness::presets::{toy_coarse_to_fine, toy_longtail};
use collapse_lab::harness::{
    ablation_grid, dump_features, dump_grid, load_data, run, run_ablation, run_coarse_to_fine,
    run_imbalanced, DataSource, RunConfig,
};
use collapse_lab::network::checkpoint;

/// The toy-LT preset shrunk to a few hundred samples and epochs.
fn quick(seed: u64, imb: f64, strategy: AugmentStrategy) -> RunConfig {
    let mut cfg = toy_longtail(seed, imb, strategy);
    cfg.epochs = 4;
    cfg.data.source = DataSource::Gaussian {
        classes: 4,
        per_class_n: 250,
        dim: 2,
        spread: 0.5,
    };
    cfg.data.imbalance.as_mut().unwrap().n_max = 200;
    cfg.data.thresholds.many = 40;
    cfg.data.thresholds.few = 8;
    cfg
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick(1, 10.0, AugmentStrategy::am_default());
    cfg.output_dir = Some(tmp.path().to_path_buf());
    let r = run_imbalanced(&cfg).unwrap();
    let history = csv_rows(&tmp.path().join("history.csv"));
    assert_eq!(history[0].join(","), "epoch,train_loss,train_acc,lambda_used,lr,test_acc");
    assert_eq!(history.len(), cfg.epochs + 1);
    assert_eq!(history[1][3], "1");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metrics.json")).unwrap()).unwrap();
    for key in [
        "alignment",
        "uniformity",
        "neighborhood_uniformity_k1",
        "acc_all",
        "acc_many",
        "acc_median",
        "acc_few",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["acc_all"].as_f64().unwrap(), r.report.accuracy.all);

    let model = checkpoint::load(&tmp.path().join("checkpoint.bin")).unwrap();
    assert_eq!(model.params(), r.model.params());
    let saved = RunConfig::from_file(&tmp.path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn balanced_data_fills_one_split() {
    let r = run(&quick(2, 1.0, AugmentStrategy::None)).unwrap();
    let a = r.report.accuracy;
    assert!(a.many.is_some());
    assert!(a.median.is_none() && a.few.is_none());
    assert_eq!(a.many, Some(a.all));
    let json = r.report.to_json();
    assert!(json["acc_median"].is_null() && json["acc_few"].is_null());
}

#[test]
fn longtail_split_sizes() {
    let cfg = quick(0, 200.0, AugmentStrategy::None);
    let tt = load_data(&cfg).unwrap();
    assert_eq!(tt.train.class_counts(), &[200, 34, 5, 1]);
    assert_eq!(tt.test.class_counts(), &[50, 50, 50, 50]);
    let again = load_data(&cfg).unwrap();
    assert_eq!(again.train.sample_ids(), tt.train.sample_ids());
}

#[test]
fn feature_and_grid_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(3, 1.0, AugmentStrategy::Mixup { alpha: 1.0 });
    let r = run(&cfg).unwrap();
    let test = load_data(&cfg).unwrap().test;

    let fpath = tmp.path().join("features.csv");
    dump_features(&r.model, &test, &fpath).unwrap();
    let rows = csv_rows(&fpath);
    assert_eq!(rows[0].join(","), "sample_id,class,f0,f1,predicted_class,confidence");
    assert_eq!(rows.len(), test.len() + 1);
    for row in &rows[1..] {
        let conf: f64 = row[5].parse().unwrap();
        assert!((0.25..=1.0).contains(&conf), "{conf}");
        assert!(row[4].parse::<usize>().unwrap() < 4);
    }

    let gpath = tmp.path().join("grid.csv");
    let feats = r.model.forward_features(test.samples()).unwrap();
    dump_grid(&r.model, &feats, 7, &gpath).unwrap();
    let grid = csv_rows(&gpath);
    assert_eq!(grid.len(), 7 * 7 + 1);
    assert!(dump_grid(&r.model, &feats, 1, &gpath).is_err());
}

#[test]
fn identity_coarse_map_matches_plain_training() {
    let (mut pre, mut fine) = toy_coarse_to_fine(4, AugmentStrategy::am_default());
    for c in [&mut pre, &mut fine] {
        c.epochs = 3;
        c.data.source = DataSource::Gaussian {
            classes: 4,
            per_class_n: 100,
            dim: 32,
            spread: 0.2,
        };
    }
    pre.data.coarse = Some(CoarseMap::identity(4));
    pre.model.num_classes = 4;
    let t = run_coarse_to_fine(&pre, &fine).unwrap();

    let mut plain = pre.clone();
    plain.data.coarse = None;
    let p = run(&plain).unwrap();
    assert_eq!(t.pretrain_history, p.history);
    assert_eq!(t.coarse_report, p.report);
    let k = p.model.encoder_param_count();
    assert_eq!(t.model.params()[..k], p.model.params()[..k]);
}

#[test]
fn transfer_freezes_encoder_and_writes_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let (mut pre, mut fine) = toy_coarse_to_fine(0, AugmentStrategy::Mixup { alpha: 1.0 });
    for c in [&mut pre, &mut fine] {
        c.epochs = 3;
        c.data.source = DataSource::Gaussian {
            classes: 4,
            per_class_n: 100,
            dim: 32,
            spread: 0.2,
        };
        c.output_dir = Some(tmp.path().to_path_buf());
    }
    let t = run_coarse_to_fine(&pre, &fine).unwrap();
    let stage1 = checkpoint::load(&tmp.path().join("pretrain/checkpoint.bin")).unwrap();
    let k = stage1.encoder_param_count();
    assert_eq!(
        checkpoint::params_digest(&stage1.params()[..k]),
        checkpoint::params_digest(&t.model.params()[..k])
    );
    assert_eq!(stage1.spec().num_classes, 2);
    assert_eq!(t.model.spec().num_classes, 4);
    assert!(tmp.path().join("finetune/metrics.json").exists());
    assert_eq!(t.finetune_history.len(), 3);
}

#[test]
fn transfer_rejects_mismatched_configs() {
    let (pre, fine) = toy_coarse_to_fine(0, AugmentStrategy::am_default());
    let mut bad = fine.clone();
    bad.strategy = AugmentStrategy::Mixup { alpha: 1.0 };
    assert_eq!(run_coarse_to_fine(&pre, &bad).unwrap_err().exit_code(), 2);
    let mut bad = fine.clone();
    bad.seed = 9;
    assert_eq!(run_coarse_to_fine(&pre, &bad).unwrap_err().exit_code(), 2);
    assert_eq!(run_coarse_to_fine(&fine, &fine).unwrap_err().exit_code(), 2);
}

#[test]
fn ablation_grid_shape() {
    let cells = ablation_grid(0.34, 1.0, 0.51);
    assert_eq!(cells.len(), 12);
    assert_eq!(cells[0], AmConfig::default());
    let mut seen: Vec<String> = cells.iter().map(|c| format!("{c:?}")).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 12);
    assert!(cells.contains(&AmConfig {
        rate_mode: RateMode::Fixed(0.51),
        ..AmConfig::default()
    }));
}

#[test]
fn ablation_runs_soft_target_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let mut base = quick(5, 10.0, AugmentStrategy::None);
    base.output_dir = Some(tmp.path().to_path_buf());
    let cells = [
        AmConfig::default(),
        AmConfig {
            rate_mode: RateMode::Fixed(0.51),
            one_sided: false,
            last_layer_only: false,
            ..AmConfig::default()
        },
    ];
    let rows = run_ablation(&base, &cells).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].history.iter().all(|h| h.lambda_used == 0.51));

    let mut am = base.clone();
    am.strategy = AugmentStrategy::am_default();
    am.output_dir = None;
    assert_eq!(run(&am).unwrap().history, rows[0].history);

    let table = csv_rows(&tmp.path().join("ablation.csv"));
    assert_eq!(table.len(), 3);
    assert_eq!(&table[2][1..4], ["fixed(0.51)", "false", "false"]);
    assert!(tmp.path().join("cell-01/checkpoint.bin").exists());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_collapse-lab")).args(args).output().unwrap()
}

#[test]
fn cli_train_and_dump_features() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(6, 1.0, AugmentStrategy::am_default());
    let conf = tmp.path().join("c.toml");
    std::fs::write(&conf, cfg.to_config_string()).unwrap();
    let out = tmp.path().join("out");
    let o = cli(&[
        "--out-dir", out.to_str().unwrap(), "--seed", "6",
        "train", "--config", conf.to_str().unwrap(), "--features", "--grid", "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("acc_all"));
    assert_eq!(csv_rows(&out.join("grid.csv")).len(), 26);

    let data = tmp.path().join("test.clab");
    io::save(&load_data(&cfg).unwrap().test, &data).unwrap();
    let dumped = tmp.path().join("dump.csv");
    let o = cli(&[
        "-q", "dump-features",
        "--checkpoint", out.join("checkpoint.bin").to_str().unwrap(),
        "--data", data.to_str().unwrap(),
        "--out", dumped.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    assert_eq!(
        std::fs::read(&dumped).unwrap(),
        std::fs::read(out.join("features.csv")).unwrap()
    );
}

#[test]
fn cli_error_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = cli(&["train", "--config", tmp.path().join("none.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(4));

    let conf = tmp.path().join("c.toml");
    std::fs::write(&conf, "[optim]\nlr = \"fast\"\n").unwrap();
    let o = cli(&["train", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optim.lr"));

    std::fs::write(&conf, "run.seed = 1\nrun.epochs = [\n").unwrap();
    let o = cli(&["train", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let mut cfg = quick(0, 1.0, AugmentStrategy::None);
    cfg.data.imbalance = None;
    std::fs::write(&conf, cfg.to_config_string()).unwrap();
    let o = cli(&["imbalanced", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
