use std::path::Path;

use crate::augment::{AmConfig, AugmentStrategy, RateMode};
use crate::data::{self, apply_coarse, gaussian_toy, longtail_subsample, LabeledDataset, TrainTest};
use crate::error::{Error, Result};
use crate::metrics::{split_accuracy, FeatureTable, MetricsReport};
use crate::network::{checkpoint, Model, Trainable};
use crate::numerics::rng::stream;
use crate::numerics::Rng;

use super::config::{DataSource, RunConfig};
use super::output::{write_history, write_metrics};
use super::train::{evaluate, fit, init_model, EpochRecord, FitOptions};

/// Neighborhood sizes reported alongside `U`.
pub const REPORT_KS: &[usize] = &[1];

/// A trained model with its per-epoch history and test-split metrics.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub report: MetricsReport,
}

/// Reads a `.csv` export or the binary dataset format, by extension.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        data::io::import_csv(path)
    } else {
        data::io::load(path)
    }
}

/// Builds the train/test splits described by `cfg.data`: generate or load,
/// long-tail the training split, then apply the coarse map to both.
pub fn load_data(cfg: &RunConfig) -> Result<TrainTest> {
    let mut tt = match &cfg.data.source {
        DataSource::Gaussian {
            classes,
            per_class_n,
            dim,
            spread,
        } => gaussian_toy(*classes, *per_class_n, *dim, *spread, cfg.seed)?,
        DataSource::Files { train, test } => TrainTest {
            train: load_dataset(train)?,
            test: load_dataset(test)?,
        },
    };
    if tt.train.num_classes() != tt.test.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "train split has {} classes, test split {}",
            tt.train.num_classes(),
            tt.test.num_classes()
        )));
    }
    if let Some(imb) = &cfg.data.imbalance {
        let mut rng = Rng::with_stream(cfg.seed, stream::SUBSAMPLE);
        tt.train = longtail_subsample(&tt.train, imb, &mut rng)?;
    }
    if let Some(map) = &cfg.data.coarse {
        tt.train = apply_coarse(&tt.train, map)?;
        tt.test = apply_coarse(&tt.test, map)?;
    }
    Ok(tt)
}

fn fit_options(cfg: &RunConfig, trainable: Trainable) -> FitOptions<'_> {
    FitOptions {
        optim: &cfg.optim,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        strategy: &cfg.strategy,
        trainable,
        seed: cfg.seed,
    }
}

/// Trains a freshly initialized model on the configured data.
pub fn train(cfg: &RunConfig) -> Result<(Model, Vec<EpochRecord>)> {
    cfg.validate()?;
    let tt = load_data(cfg)?;
    let mut model = init_model(cfg.model.clone(), cfg.seed)?;
    let history = fit(&mut model, &tt.train, &tt.test, &fit_options(cfg, Trainable::All))?;
    Ok((model, history))
}

/// `A`, `U`, `U_k` and split accuracies of `model` on `test`, with splits
/// from the training class counts.
pub fn report(
    model: &Model,
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &RunConfig,
) -> Result<MetricsReport> {
    let eval = evaluate(model, test)?;
    let acc = split_accuracy(
        &eval.predictions,
        test.labels(),
        train.class_counts(),
        cfg.data.thresholds,
    )?;
    let table = FeatureTable::new(eval.features, test.labels().to_vec(), test.num_classes())?;
    MetricsReport::from_features(&table, REPORT_KS, acc)
}

/// Writes `history.csv`, `metrics.json`, `checkpoint.bin` and the resolved
/// `config.toml` into `dir`.
pub fn save_run(dir: &Path, cfg: &RunConfig, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_history(&dir.join("history.csv"), &result.history)?;
    write_metrics(&dir.join("metrics.json"), &result.report)?;
    checkpoint::save(&result.model, &dir.join("checkpoint.bin"))?;
    let conf = dir.join("config.toml");
    std::fs::write(&conf, cfg.to_config_string()).map_err(|e| Error::io(&conf, e))
}

/// Train, evaluate and (when `cfg.output_dir` is set) persist one run.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let tt = load_data(cfg)?;
    let mut model = init_model(cfg.model.clone(), cfg.seed)?;
    let history = fit(&mut model, &tt.train, &tt.test, &fit_options(cfg, Trainable::All))?;
    let report = report(&model, &tt.train, &tt.test, cfg)?;
    let result = RunResult {
        model,
        history,
        report,
    };
    if let Some(dir) = &cfg.output_dir {
        save_run(dir, cfg, &result)?;
    }
    Ok(result)
}

/// Long-tailed training evaluated on the balanced test split.
pub fn run_imbalanced(cfg: &RunConfig) -> Result<RunResult> {
    if cfg.data.imbalance.is_none() {
        return Err(Error::config(
            "data.imb_factor",
            "imbalanced runs need an imbalance factor",
        ));
    }
    run(cfg)
}

#[derive(Clone, Debug)]
pub struct TransferResult {
    /// Encoder with the fine classifier.
    pub model: Model,
    pub pretrain_history: Vec<EpochRecord>,
    pub finetune_history: Vec<EpochRecord>,
    /// Metrics of the coarse stage on coarse test labels; its `alignment`
    /// is the coarse-stage `A`.
    pub coarse_report: MetricsReport,
    pub fine_report: MetricsReport,
}

/// Coarse pretraining with the pretrain config's strategy, then a fresh fine
/// classifier on the frozen encoder with plain cross entropy.
///
/// The pretrain config carries `data.coarse_map`; the finetune config
/// describes the same data without it. With an output directory set, stage
/// artifacts go to `pretrain/` and `finetune/` below it.
pub fn run_coarse_to_fine(pretrain: &RunConfig, finetune: &RunConfig) -> Result<TransferResult> {
    pretrain.validate()?;
    finetune.validate()?;
    let Some(map) = &pretrain.data.coarse else {
        return Err(Error::config("data.coarse_map", "pretraining needs a coarse map"));
    };
    if finetune.data.coarse.is_some() {
        return Err(Error::config(
            "data.coarse_map",
            "the finetune config must use fine labels",
        ));
    }
    if finetune.strategy != AugmentStrategy::None {
        return Err(Error::config(
            "strategy.kind",
            "fine-tuning trains a linear classifier with plain cross entropy; use `none`",
        ));
    }
    if pretrain.data.source != finetune.data.source || pretrain.seed != finetune.seed {
        return Err(Error::config(
            "data.source",
            "pretrain and finetune configs must describe the same data and seed",
        ));
    }
    if map.num_fine() != finetune.model.num_classes {
        return Err(Error::config(
            "model.num_classes",
            format!(
                "coarse map covers {} fine classes, finetune model has {}",
                map.num_fine(),
                finetune.model.num_classes
            ),
        ));
    }
    let mut encoder_spec = finetune.model.clone();
    encoder_spec.num_classes = pretrain.model.num_classes;
    if encoder_spec != pretrain.model {
        return Err(Error::config(
            "model",
            "pretrain and finetune encoders differ",
        ));
    }

    let coarse = load_data(pretrain)?;
    let mut model = init_model(pretrain.model.clone(), pretrain.seed)?;
    let pretrain_history = fit(
        &mut model,
        &coarse.train,
        &coarse.test,
        &fit_options(pretrain, Trainable::All),
    )?;
    let coarse_report = report(&model, &coarse.train, &coarse.test, pretrain)?;
    if let Some(dir) = &pretrain.output_dir {
        let stage = RunResult {
            model: model.clone(),
            history: pretrain_history.clone(),
            report: coarse_report.clone(),
        };
        save_run(&dir.join("pretrain"), pretrain, &stage)?;
    }

    let fine = TrainTest {
        train: coarse.train.to_fine()?,
        test: coarse.test.to_fine()?,
    };
    let mut head_rng = Rng::with_stream(finetune.seed, stream::INIT);
    model.reset_classifier(fine.train.num_classes(), &mut head_rng)?;
    let finetune_history = fit(
        &mut model,
        &fine.train,
        &fine.test,
        &fit_options(finetune, Trainable::ClassifierOnly),
    )?;
    let fine_report = report(&model, &fine.train, &fine.test, finetune)?;
    if let Some(dir) = finetune.output_dir.as_ref().or(pretrain.output_dir.as_ref()) {
        let stage = RunResult {
            model: model.clone(),
            history: finetune_history.clone(),
            report: fine_report.clone(),
        };
        save_run(&dir.join("finetune"), finetune, &stage)?;
    }
    Ok(TransferResult {
        model,
        pretrain_history,
        finetune_history,
        coarse_report,
        fine_report,
    })
}

/// `α` of the fixed-Beta ablation cells.
pub const ABLATION_BETA_ALPHA: f64 = 1.0;
/// Rate of the constant-rate ablation cells.
pub const ABLATION_FIXED_RATE: f64 = 0.51;

/// The three rate modes crossed with one-sided labeling and
/// last-layer-only switches: 12 AM-mixup variants. The first cell is the
/// default configuration.
pub fn ablation_grid(beta: f64, beta_alpha: f64, fixed_rate: f64) -> Vec<AmConfig> {
    let modes = [
        RateMode::Scheduled,
        RateMode::FixedBeta { alpha: beta_alpha },
        RateMode::Fixed(fixed_rate),
    ];
    let mut cells = Vec::new();
    for rate_mode in modes {
        for one_sided in [true, false] {
            for last_layer_only in [true, false] {
                cells.push(AmConfig {
                    beta,
                    rate_mode,
                    one_sided,
                    last_layer_only,
                });
            }
        }
    }
    cells
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub cell: AmConfig,
    pub history: Vec<EpochRecord>,
    pub report: MetricsReport,
}

fn rate_mode_label(m: RateMode) -> String {
    match m {
        RateMode::Scheduled => "scheduled".into(),
        RateMode::FixedBeta { alpha } => format!("fixed_beta({alpha})"),
        RateMode::Fixed(v) => format!("fixed({v})"),
    }
}

/// One run per cell, all with `base.seed`, so the default cell reproduces a
/// plain AM-mixup run of `base` exactly. With an output directory set, each
/// cell is saved under `cell-NN/` and a summary goes to `ablation.csv`.
pub fn run_ablation(base: &RunConfig, cells: &[AmConfig]) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let cfg = RunConfig {
            strategy: AugmentStrategy::AmMixup(cell.clone()),
            output_dir: base.output_dir.as_ref().map(|d| d.join(format!("cell-{i:02}"))),
            ..base.clone()
        };
        let r = run(&cfg)?;
        rows.push(AblationRow {
            cell: cell.clone(),
            history: r.history,
            report: r.report,
        });
    }
    if let Some(dir) = &base.output_dir {
        let path = dir.join("ablation.csv");
        std::fs::write(&path, ablation_csv(&rows)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut out = String::from(
        "cell,rate_mode,one_sided,last_layer_only,alignment,uniformity,neighborhood_uniformity_k1,acc_all,acc_many,acc_median,acc_few\n",
    );
    for (i, r) in rows.iter().enumerate() {
        let a = &r.report.accuracy;
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{},{}\n",
            rate_mode_label(r.cell.rate_mode),
            r.cell.one_sided,
            r.cell.last_layer_only,
            r.report.alignment,
            r.report.uniformity,
            opt(r.report.neighborhood_k(1)),
            a.all,
            opt(a.many),
            opt(a.median),
            opt(a.few),
        ));
    }
    out
}
