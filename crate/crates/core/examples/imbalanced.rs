//! Long-tailed 2-D toy: plain training, input mixup and AM-mixup side by
//! side, with Many/Median/Few accuracy and the collapse metrics.
//!
//! `cargo run --release --example imbalanced [imb_factor] [epochs] [seed]`

use collapse_lab::augment::AugmentStrategy;
use collapse_lab::harness::presets::toy_longtail;
use collapse_lab::harness::run_imbalanced;

fn main() -> collapse_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let imb: f64 = args.first().map_or(100.0, |s| s.parse().expect("imb_factor"));
    let epochs: usize = args.get(1).map_or(40, |s| s.parse().expect("epochs"));
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));

    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("strategy  A       U       U_1     all    many   median few");
    for strategy in [
        AugmentStrategy::None,
        AugmentStrategy::Mixup { alpha: 1.0 },
        AugmentStrategy::am_default(),
    ] {
        let mut cfg = toy_longtail(seed, imb, strategy.clone());
        cfg.epochs = epochs;
        let r = run_imbalanced(&cfg)?;
        let (m, a) = (&r.report, &r.report.accuracy);
        println!(
            "{:<9} {:.4}  {:.4}  {}  {:.3}  {}  {}  {}",
            strategy.label(),
            m.alignment,
            m.uniformity,
            fmt(m.neighborhood_k(1)),
            a.all,
            fmt(a.many),
            fmt(a.median),
            fmt(a.few),
        );
    }
    Ok(())
}
