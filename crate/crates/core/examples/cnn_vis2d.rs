//! Small CNN with a 2-D feature layer on synthetic 8×8 images (a bright
//! bar in one of four positions), trained with manifold mixup.

use collapse_lab::augment::AugmentStrategy;
use collapse_lab::data::LabeledDataset;
use collapse_lab::harness::{evaluate, fit, init_model, FitOptions, OptimConfig};
use collapse_lab::network::{EncoderSpec, LrSchedule, ModelSpec, Trainable};
use collapse_lab::{Rng, Tensor};

fn bars(n: usize, seed: u64) -> collapse_lab::Result<LabeledDataset> {
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(n * 64);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 4;
        for y in 0..8 {
            for x in 0..8 {
                let on = match c {
                    0 => y < 2,
                    1 => y >= 6,
                    2 => x < 2,
                    _ => x >= 6,
                };
                data.push(if on { 1.0 } else { 0.0 } + 0.3 * rng.normal());
            }
        }
        labels.push(c);
    }
    LabeledDataset::new("bars", Tensor::new(vec![n, 1, 8, 8], data)?, labels, 4)
}

fn main() -> collapse_lab::Result<()> {
    let (train, test) = (bars(400, 1)?, bars(200, 2)?);
    let spec = ModelSpec {
        encoder: EncoderSpec::CnnVis2d {
            in_channels: 1,
            height: 8,
            width: 8,
            channels: vec![4, 8],
        },
        feature_dim: 2,
        num_classes: 4,
    };
    let mut model = init_model(spec, 0)?;
    let optim = OptimConfig {
        schedule: LrSchedule::constant(0.05),
        ..OptimConfig::default()
    };
    let strategy = AugmentStrategy::ManifoldMixup {
        alpha: 1.0,
        eligible_layers: None,
    };
    let opts = FitOptions {
        optim: &optim,
        epochs: 15,
        batch_size: 32,
        strategy: &strategy,
        trainable: Trainable::All,
        seed: 0,
    };
    for h in fit(&mut model, &train, &test, &opts)? {
        println!("epoch {:>2}  loss {:.4}  test acc {:.3}", h.epoch, h.train_loss, h.test_acc);
    }
    let eval = evaluate(&model, &test)?;
    println!("final test accuracy {:.3}", eval.accuracy);
    Ok(())
}
