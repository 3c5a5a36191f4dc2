//! Trains briefly, then writes the test features with predictions and the
//! classifier's decision grid over the feature plane, ready for plotting.
//!
//! `cargo run --release --example dump_features [out_dir]`

use std::path::PathBuf;

use collapse_lab::augment::AugmentStrategy;
use collapse_lab::harness::presets::toy_longtail;
use collapse_lab::harness::{dump_features, dump_grid, load_data, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let mut cfg = toy_longtail(2, 10.0, AugmentStrategy::am_default());
    cfg.epochs = 15;
    let r = run(&cfg)?;
    let test = load_data(&cfg)?.test;

    let features = out.join("features.csv");
    let grid = out.join("grid.csv");
    dump_features(&r.model, &test, &features)?;
    dump_grid(&r.model, &r.model.forward_features(test.samples())?, 60, &grid)?;
    println!("test accuracy {:.4}", r.report.accuracy.all);
    println!("wrote {} and {}", features.display(), grid.display());
    Ok(())
}
