use crate::augment::{self, AmConfig, AugmentStrategy, RateMode};
use crate::data::{one_hot, LabeledDataset};
use crate::error::{Error, Result};
use crate::network::{BoundParams, Model, Sgd, Trainable};
use crate::numerics::rng::stream;
use crate::numerics::{beta_sample, softmax, NodeId, Rng, Tape, Tensor};

use super::config::OptimConfig;

/// One row of `history.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses.
    pub train_loss: f64,
    /// Online accuracy of pre-update predictions; mixed batches count
    /// `λ·[ŷ = y_i] + (1−λ)·[ŷ = y_j]`.
    pub train_acc: f64,
    /// Mean mixing rate over the epoch's batches (1 without mixing).
    pub lambda_used: f64,
    pub lr: f64,
    pub test_acc: f64,
}

/// Everything the loop needs besides the model and the data.
#[derive(Clone, Debug)]
pub struct FitOptions<'a> {
    pub optim: &'a OptimConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub strategy: &'a AugmentStrategy,
    pub trainable: Trainable,
    pub seed: u64,
}

/// Predicted classes and max-softmax confidences for a dataset.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub features: Tensor,
    pub predictions: Vec<usize>,
    pub confidences: Vec<f64>,
    pub accuracy: f64,
}

/// Full-split forward pass.
pub fn evaluate(model: &Model, ds: &LabeledDataset) -> Result<Evaluation> {
    let features = model.forward_features(ds.samples())?;
    let probs = softmax(&model.forward_logits(&features)?)?;
    let mut predictions = Vec::with_capacity(ds.len());
    let mut confidences = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let k = probs.argmax_row(i);
        predictions.push(k);
        confidences.push(probs.row(i)[k]);
    }
    let hits = predictions
        .iter()
        .zip(ds.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(Evaluation {
        features,
        predictions,
        confidences,
        accuracy: hits as f64 / ds.len() as f64,
    })
}

fn default_eligible(model: &Model) -> Vec<usize> {
    (0..=model.spec().num_blocks()).collect()
}

/// Loss node plus the batch's accuracy credit.
struct BatchPass {
    tape: Tape,
    bound: BoundParams,
    loss: NodeId,
    hits: f64,
    lambda: f64,
}

struct Batch<'a> {
    x: Tensor,
    labels: &'a [usize],
    y: Tensor,
}

fn mixed_hits(probs: &Tensor, labels: &[usize], pairing: &[usize], lambda: f64) -> f64 {
    (0..labels.len())
        .map(|i| {
            let p = probs.argmax_row(i);
            let own = f64::from(u8::from(p == labels[i]));
            let other = f64::from(u8::from(p == labels[pairing[i]]));
            lambda * own + (1.0 - lambda) * other
        })
        .sum()
}

fn plain_hits(probs: &Tensor, labels: &[usize]) -> f64 {
    (0..labels.len())
        .filter(|&i| probs.argmax_row(i) == labels[i])
        .count() as f64
}

struct Trainer<'a> {
    model: &'a Model,
    trainable: Trainable,
    aug: &'a mut Rng,
}

impl Trainer<'_> {
    fn plain(&mut self, b: &Batch) -> Result<BatchPass> {
        let mut tape = Tape::new();
        let bound = self.model.bind(&mut tape, self.trainable);
        let x = tape.constant(b.x.clone());
        let z = self.model.encode(&mut tape, &bound, x)?;
        let o = self.model.classify(&mut tape, &bound, z)?;
        let loss = tape.softmax_xent(o, &b.y)?;
        let hits = plain_hits(tape.probs(loss).expect("xent node"), b.labels);
        Ok(BatchPass {
            tape,
            bound,
            loss,
            hits,
            lambda: 1.0,
        })
    }

    /// Mixup at representation `layer` (0 = input space).
    fn mixed_at(&mut self, b: &Batch, alpha: f64, layer: usize) -> Result<BatchPass> {
        let lambda = beta_sample(self.aug, alpha)?;
        let pairing = augment::random_pairing(self.aug, b.labels.len());
        let target = crate::numerics::ops::mix_rows(&b.y, &pairing, lambda)?;
        let mut tape = Tape::new();
        let bound = self.model.bind(&mut tape, self.trainable);
        let fl = self.model.spec().feature_layer();
        let x = if layer == 0 {
            let mixed = augment::mixup_batch(&b.x, &b.y, lambda, &pairing)?;
            tape.constant(mixed.inputs_or_features)
        } else {
            tape.constant(b.x.clone())
        };
        let h = self.model.encode_between(&mut tape, &bound, x, 0, layer)?;
        let h = if layer == 0 {
            h
        } else {
            tape.mix_rows(h, &pairing, lambda)?
        };
        let z = self.model.encode_between(&mut tape, &bound, h, layer, fl)?;
        let o = self.model.classify(&mut tape, &bound, z)?;
        let loss = tape.softmax_xent(o, &target)?;
        let hits = mixed_hits(tape.probs(loss).expect("xent node"), b.labels, &pairing, lambda);
        Ok(BatchPass {
            tape,
            bound,
            loss,
            hits,
            lambda,
        })
    }

    /// CE on the clean batch plus CE on one augmented feature per row.
    fn am(&mut self, b: &Batch, am: &AmConfig, lambda_am: f64) -> Result<BatchPass> {
        let lambda = match am.rate_mode {
            RateMode::Scheduled => lambda_am,
            RateMode::FixedBeta { alpha } => beta_sample(self.aug, alpha)?,
            RateMode::Fixed(v) => v,
        };
        let pairing = augment::random_pairing(self.aug, b.labels.len());
        let fl = self.model.spec().feature_layer();
        let layer = if am.last_layer_only {
            fl
        } else {
            let mut eligible = default_eligible(self.model);
            eligible.push(fl);
            augment::manifold_mix_layer(self.aug, &eligible)?
        };
        let c = self.model.spec().num_classes;
        let target = augment::am_targets(b.labels, c, lambda, &pairing, am.one_sided)?;

        let mut tape = Tape::new();
        let bound = self.model.bind(&mut tape, self.trainable);
        let x = tape.constant(b.x.clone());
        let h = self.model.encode_between(&mut tape, &bound, x, 0, layer)?;
        let z = self.model.encode_between(&mut tape, &bound, h, layer, fl)?;
        let o = self.model.classify(&mut tape, &bound, z)?;
        let ce = tape.softmax_xent(o, &b.y)?;
        let hits = plain_hits(tape.probs(ce).expect("xent node"), b.labels);

        let hm = tape.mix_rows(h, &pairing, lambda)?;
        let zm = self.model.encode_between(&mut tape, &bound, hm, layer, fl)?;
        let om = self.model.classify(&mut tape, &bound, zm)?;
        let aug_loss = tape.softmax_xent(om, &target)?;
        let loss = tape.add(ce, aug_loss)?;
        Ok(BatchPass {
            tape,
            bound,
            loss,
            hits,
            lambda,
        })
    }
}

/// Trains `model` in place and returns one record per epoch.
///
/// Batch order comes from the seed's shuffle stream and pairings/rates from
/// its augment stream, so a fixed seed reproduces the run exactly.
pub fn fit(
    model: &mut Model,
    train: &LabeledDataset,
    test: &LabeledDataset,
    opts: &FitOptions,
) -> Result<Vec<EpochRecord>> {
    opts.strategy.validate()?;
    opts.optim.schedule.validate()?;
    if train.num_classes() != model.spec().num_classes {
        return Err(Error::InvalidArgument(format!(
            "model has {} classes, training data {}",
            model.spec().num_classes,
            train.num_classes()
        )));
    }
    if opts.batch_size == 0 || (opts.strategy.mixes() && opts.batch_size < 2) {
        return Err(Error::InvalidArgument(format!(
            "batch size {} too small for strategy {}",
            opts.batch_size,
            opts.strategy.label()
        )));
    }
    let eligible = match opts.strategy {
        AugmentStrategy::ManifoldMixup {
            eligible_layers: Some(l),
            ..
        } => l.clone(),
        _ => default_eligible(model),
    };
    if let Some(&bad) = eligible.iter().find(|&&l| l > model.spec().feature_layer()) {
        return Err(Error::InvalidArgument(format!(
            "eligible layer {bad} beyond feature layer {}",
            model.spec().feature_layer()
        )));
    }

    let mut shuffle = Rng::with_stream(opts.seed, stream::SHUFFLE);
    let mut aug = Rng::with_stream(opts.seed, stream::AUGMENT);
    let mut sgd = Sgd::new(
        model.params(),
        opts.optim.schedule.initial_lr,
        opts.optim.momentum,
        opts.optim.weight_decay,
    )?;
    let n = train.len();
    let y_all = one_hot(train.labels(), train.num_classes());
    let mut v_acc = 0.0;
    let mut history = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        let lr = opts.optim.schedule.lr_at(epoch);
        sgd.set_lr(lr)?;
        let lambda_am = match opts.strategy {
            AugmentStrategy::AmMixup(am) => augment::am_lambda(v_acc, am.beta)?,
            _ => 1.0,
        };
        let order = shuffle.permutation(n);
        let (mut loss_sum, mut hits, mut lambda_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for (bi, idx) in order.chunks(opts.batch_size).enumerate() {
            let labels: Vec<usize> = idx.iter().map(|&i| train.labels()[i]).collect();
            let batch = Batch {
                x: train.samples().select_rows(idx),
                labels: &labels,
                y: y_all.select_rows(idx),
            };
            let snapshot: &Model = model;
            let mut t = Trainer {
                model: snapshot,
                trainable: opts.trainable,
                aug: &mut aug,
            };
            let pass = match opts.strategy {
                AugmentStrategy::None => t.plain(&batch),
                AugmentStrategy::Mixup { alpha } => t.mixed_at(&batch, *alpha, 0),
                AugmentStrategy::ManifoldMixup { alpha, .. } => {
                    let layer = augment::manifold_mix_layer(t.aug, &eligible)?;
                    t.mixed_at(&batch, *alpha, layer)
                }
                AugmentStrategy::AmMixup(am) => t.am(&batch, am, lambda_am),
            }
            .map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("{context} (epoch {}, batch {bi})", epoch + 1),
                },
                other => other,
            })?;
            let loss = pass.tape.value(pass.loss).data()[0];
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss {loss} at epoch {}, batch {bi}", epoch + 1),
                });
            }
            let mut grads = pass.tape.backward(pass.loss)?;
            for (p, &id) in model.params_mut().iter_mut().zip(pass.bound.ids()) {
                if let Some(g) = grads.take(id) {
                    p.set_grad(g)?;
                }
            }
            let names = model.param_names().to_vec();
            sgd.step(model.params_mut(), &names).map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("{context} at epoch {}, batch {bi}", epoch + 1),
                },
                other => other,
            })?;
            loss_sum += loss * idx.len() as f64;
            hits += pass.hits;
            lambda_sum += pass.lambda;
            batches += 1;
        }
        if let Some((i, _)) = model.params().iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(Error::NonFinite {
                context: format!(
                    "parameter `{}` after epoch {}",
                    model.param_names()[i],
                    epoch + 1
                ),
            });
        }
        let train_acc = hits / n as f64;
        v_acc = train_acc.clamp(0.0, 1.0);
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / n as f64,
            train_acc,
            lambda_used: lambda_sum / batches as f64,
            lr,
            test_acc: evaluate(model, test)?.accuracy,
        });
    }
    Ok(history)
}

/// Fresh model from the seed's init stream.
pub fn init_model(spec: crate::network::ModelSpec, seed: u64) -> Result<Model> {
    Model::init(spec, &mut Rng::with_stream(seed, stream::INIT))
}
