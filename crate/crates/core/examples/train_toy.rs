//! Trains the balanced 2-D toy from a config file and prints the epoch
//! history and final metrics.
//!
//! `cargo run --release --example train_toy [config.toml] [out_dir]`

use std::path::PathBuf;

use collapse_lab::harness::{history_csv, run, RunConfig};

fn main() -> collapse_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/toy_train.toml")));
    let mut cfg = RunConfig::from_file(&path)?;
    cfg.output_dir = args.next().map(PathBuf::from);

    let r = run(&cfg)?;
    print!("{}", history_csv(&r.history));
    println!("{}", serde_json::to_string_pretty(&r.report.to_json()).unwrap());
    Ok(())
}
