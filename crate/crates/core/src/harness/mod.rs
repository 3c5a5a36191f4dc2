//! Experiment orchestration: the training loop, the imbalanced and
//! coarse-to-fine protocols, the AM-mixup ablation grid, config files and
//! run artifacts.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod train;

pub use config::{DataConfig, DataSource, OptimConfig, RunConfig};
pub use output::{dump_features, dump_grid, history_csv};
pub use run::{
    ablation_csv, ablation_grid, load_data, load_dataset, run, run_ablation, run_coarse_to_fine, run_imbalanced, train,
    AblationRow, RunResult, TransferResult,
};
pub use train::{evaluate, fit, init_model, EpochRecord, Evaluation, FitOptions};
