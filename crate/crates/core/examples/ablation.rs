//! Runs the 12-cell AM-mixup ablation (rate mode × one-sided labels ×
//! mixing layer) on the long-tailed toy and prints the summary table.
//!
//! `cargo run --release --example ablation [epochs] [out_dir]`

use std::path::PathBuf;

use collapse_lab::augment::AugmentStrategy;
use collapse_lab::harness::presets::toy_longtail;
use collapse_lab::harness::run::{ABLATION_BETA_ALPHA, ABLATION_FIXED_RATE};
use collapse_lab::harness::{ablation_csv, ablation_grid, run_ablation};

fn main() -> collapse_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args.first().map_or(10, |s| s.parse().expect("epochs"));
    let mut base = toy_longtail(0, 200.0, AugmentStrategy::None);
    base.epochs = epochs;
    base.output_dir = args.get(1).map(PathBuf::from);

    let cells = ablation_grid(0.34, ABLATION_BETA_ALPHA, ABLATION_FIXED_RATE);
    let rows = run_ablation(&base, &cells)?;
    print!("{}", ablation_csv(&rows));
    Ok(())
}
