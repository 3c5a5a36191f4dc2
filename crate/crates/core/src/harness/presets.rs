//! Desk-scale experiment setups on the Gaussian toy.
//!
//! All presets share the MLP `in → 64 → 32 → 2` with a 4-way (or 2-way
//! coarse) classifier, 100 epochs of SGD (momentum 0.9, weight decay 5e-4,
//! batch 128) and a learning rate that ramps linearly from 0.01 to 0.1 over
//! the first 5 epochs, then decays ×0.2 at epochs 30, 60 and 80.

use crate::augment::AugmentStrategy;
use crate::data::{CoarseMap, ImbalanceSpec};
use crate::metrics::SplitThresholds;
use crate::network::{LrSchedule, ModelSpec, ScheduleKind};

use super::config::{DataConfig, DataSource, OptimConfig, RunConfig};

pub const TOY_CLASSES: usize = 4;
/// Samples per class before the 4:1 train/test split.
pub const TOY_PER_CLASS: usize = 2500;
/// Balanced training count per class, the head count of long-tailed runs.
pub const TOY_N_MAX: usize = 2000;
pub const TOY_HIDDEN: [usize; 2] = [64, 32];

/// Step decay behind a 5-epoch linear warmup.
pub fn desk_schedule() -> LrSchedule {
    LrSchedule {
        initial_lr: 0.1,
        kind: ScheduleKind::LinearWarmupThenStep {
            warmup_epochs: 5,
            warmup_start: 0.01,
            milestones: vec![30, 60, 80],
            factor: 0.2,
        },
    }
}

fn base(seed: u64, dim: usize, spread: f64, classes: usize, strategy: AugmentStrategy) -> RunConfig {
    RunConfig {
        model: ModelSpec::mlp(dim, &TOY_HIDDEN, 2, classes),
        optim: OptimConfig {
            momentum: 0.9,
            weight_decay: 5e-4,
            schedule: desk_schedule(),
        },
        epochs: 100,
        batch_size: 128,
        data: DataConfig {
            source: DataSource::Gaussian {
                classes: TOY_CLASSES,
                per_class_n: TOY_PER_CLASS,
                dim,
                spread,
            },
            imbalance: None,
            coarse: None,
            // {2000, 342, 58, 10} at imbalance 200 → Many, Median, Few, Few
            thresholds: SplitThresholds { many: 400, few: 80 },
        },
        strategy,
        seed,
        output_dir: None,
    }
}

/// Long-tailed 2-D toy: counts `{2000, 342, 58, 10}` at `imb_factor = 200`,
/// cluster spread 0.5.
pub fn toy_longtail(seed: u64, imb_factor: f64, strategy: AugmentStrategy) -> RunConfig {
    let mut cfg = base(seed, 2, 0.5, TOY_CLASSES, strategy);
    cfg.data.imbalance = Some(ImbalanceSpec {
        imb_factor,
        n_max: TOY_N_MAX,
    });
    cfg
}

/// Superclasses pair the clusters at opposite angles: `{0, 2}` and `{1, 3}`.
pub fn toy_coarse_map() -> CoarseMap {
    CoarseMap::new(vec![0, 1, 0, 1]).expect("onto")
}

/// Coarse pretraining and fine probing configs on the 32-D toy with spread
/// 0.2. The pretrain stage uses `strategy`; the probe uses plain CE.
pub fn toy_coarse_to_fine(seed: u64, strategy: AugmentStrategy) -> (RunConfig, RunConfig) {
    let map = toy_coarse_map();
    let mut pretrain = base(seed, 32, 0.2, map.num_coarse(), strategy);
    pretrain.data.coarse = Some(map);
    let finetune = base(seed, 32, 0.2, TOY_CLASSES, AugmentStrategy::None);
    (pretrain, finetune)
}
