//! Pretrains on 2 superclasses of the 32-D toy, freezes the encoder and fits
//! a fresh 4-way classifier, once per pretraining strategy.
//!
//! `cargo run --release --example coarse_to_fine [epochs] [seed]`

use collapse_lab::augment::AugmentStrategy;
use collapse_lab::harness::presets::toy_coarse_to_fine;
use collapse_lab::harness::run_coarse_to_fine;

fn main() -> collapse_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args.first().map_or(30, |s| s.parse().expect("epochs"));
    let seed: u64 = args.get(1).map_or(0, |s| s.parse().expect("seed"));

    println!("pretrain  coarse A  coarse acc  fine acc");
    for strategy in [
        AugmentStrategy::None,
        AugmentStrategy::Mixup { alpha: 1.0 },
        AugmentStrategy::am_default(),
    ] {
        let (mut pre, mut fine) = toy_coarse_to_fine(seed, strategy.clone());
        pre.epochs = epochs;
        fine.epochs = epochs;
        let t = run_coarse_to_fine(&pre, &fine)?;
        println!(
            "{:<9} {:>8.4}  {:>10.4}  {:>8.4}",
            strategy.label(),
            t.coarse_report.alignment,
            t.coarse_report.accuracy.all,
            t.fine_report.accuracy.all,
        );
    }
    Ok(())
}
