//! Interpolation strategies and their losses: input mixup, manifold mixup
//! and asymptotic midpoint mixup (AM-mixup).
//!
//! AM-mixup mixes last-layer features of random pairs at a rate
//! `λ_am = exp(−β·v_acc)` driven by the previous epoch's training accuracy,
//! and labels each mixed feature with the class of its dominant side.

use crate::error::{Error, Result};
use crate::numerics::{ops, softmax_xent, Rng, Tensor};

/// How AM-mixup picks its mixing rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateMode {
    /// `λ_am = exp(−β·v_acc)`, updated once per epoch.
    Scheduled,
    /// A fresh `Beta(α, α)` draw per batch.
    FixedBeta { alpha: f64 },
    /// A constant rate in `(0, 1)`.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmConfig {
    pub beta: f64,
    pub rate_mode: RateMode,
    pub one_sided: bool,
    pub last_layer_only: bool,
}

impl Default for AmConfig {
    fn default() -> Self {
        Self {
            beta: 0.34,
            rate_mode: RateMode::Scheduled,
            one_sided: true,
            last_layer_only: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum AugmentStrategy {
    #[default]
    None,
    Mixup {
        alpha: f64,
    },
    /// `eligible_layers: None` means the input plus every block output.
    ManifoldMixup {
        alpha: f64,
        eligible_layers: Option<Vec<usize>>,
    },
    AmMixup(AmConfig),
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(())
}

impl AugmentStrategy {
    pub fn am_default() -> Self {
        Self::AmMixup(AmConfig::default())
    }

    /// Short name used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "ce",
            Self::Mixup { .. } => "mixup",
            Self::ManifoldMixup { .. } => "manifold_mixup",
            Self::AmMixup(_) => "am_mixup",
        }
    }

    /// Whether batches are paired, which needs at least two rows.
    pub fn mixes(&self) -> bool {
        !matches!(self, Self::None)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::None => Ok(()),
            Self::Mixup { alpha } => check_alpha(*alpha),
            Self::ManifoldMixup {
                alpha,
                eligible_layers,
            } => {
                check_alpha(*alpha)?;
                if eligible_layers.as_ref().is_some_and(Vec::is_empty) {
                    return Err(Error::InvalidArgument("eligible layer set is empty".into()));
                }
                Ok(())
            }
            Self::AmMixup(am) => {
                if !(am.beta >= 0.0 && am.beta.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "beta must be >= 0, got {}",
                        am.beta
                    )));
                }
                match am.rate_mode {
                    RateMode::Scheduled => Ok(()),
                    RateMode::FixedBeta { alpha } => check_alpha(alpha),
                    RateMode::Fixed(v) if v > 0.0 && v < 1.0 => Ok(()),
                    RateMode::Fixed(v) => Err(Error::InvalidArgument(format!(
                        "fixed rate must lie in (0, 1), got {v}"
                    ))),
                }
            }
        }
    }
}

/// An interpolated batch with its soft (or one-sided) targets.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedBatch {
    pub inputs_or_features: Tensor,
    pub target: Tensor,
    pub lambda_used: f64,
    pub pairing: Vec<usize>,
}

fn check_lambda(lambda: f64, lower_open: bool) -> Result<()> {
    let ok = if lower_open {
        lambda > 0.0 && lambda <= 1.0
    } else {
        (0.0..=1.0).contains(&lambda)
    };
    if !ok {
        return Err(Error::InvalidArgument(format!("mixing rate {lambda} out of range")));
    }
    Ok(())
}

/// Errors unless `pairing` is a permutation of `0..n`.
pub fn check_pairing(pairing: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if pairing.len() != n {
        return Err(Error::shape(
            "pairing",
            format!("length {} for batch of {n}", pairing.len()),
        ));
    }
    for &j in pairing {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidArgument(format!(
                "pairing is not a permutation (index {j})"
            )));
        }
    }
    Ok(())
}

/// Uniformly random partner assignment.
pub fn random_pairing(rng: &mut Rng, n: usize) -> Vec<usize> {
    rng.permutation(n)
}

/// `x′ = λ·x_i + (1−λ)·x_j`, `y′ = λ·y_i + (1−λ)·y_j` with `j = pairing[i]`.
pub fn mixup_batch(x: &Tensor, y_onehot: &Tensor, lambda: f64, pairing: &[usize]) -> Result<MixedBatch> {
    check_lambda(lambda, false)?;
    check_pairing(pairing, x.rows())?;
    if y_onehot.rank() != 2 || y_onehot.rows() != x.rows() {
        return Err(Error::shape(
            "mixup_batch",
            format!("labels {:?} for inputs {:?}", y_onehot.shape(), x.shape()),
        ));
    }
    Ok(MixedBatch {
        inputs_or_features: ops::mix_rows(x, pairing, lambda)?,
        target: ops::mix_rows(y_onehot, pairing, lambda)?,
        lambda_used: lambda,
        pairing: pairing.to_vec(),
    })
}

/// Uniform draw of the representation layer to mix at.
pub fn manifold_mix_layer(rng: &mut Rng, eligible: &[usize]) -> Result<usize> {
    if eligible.is_empty() {
        return Err(Error::InvalidArgument("eligible layer set is empty".into()));
    }
    Ok(eligible[rng.below(eligible.len())])
}

/// `exp(−β·v_acc)`.
pub fn am_lambda(v_acc: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_acc) {
        return Err(Error::InvalidArgument(format!(
            "training accuracy {v_acc} outside [0, 1]"
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    Ok((-beta * v_acc).exp())
}

/// Hard label of each mixed pair: the own class when `λ ≥ 0.5`, else the
/// partner's.
pub fn one_sided_labels(labels: &[usize], pairing: &[usize], lambda: f64) -> Vec<usize> {
    if lambda >= 0.5 {
        labels.to_vec()
    } else {
        pairing.iter().map(|&j| labels[j]).collect()
    }
}

/// Mixed feature targets: one-hot at the dominant side's class when
/// `one_sided`, else the soft `(λ, 1−λ)` mixup target.
pub fn am_targets(
    labels: &[usize],
    num_classes: usize,
    lambda: f64,
    pairing: &[usize],
    one_sided: bool,
) -> Result<Tensor> {
    if one_sided {
        Ok(crate::data::one_hot(
            &one_sided_labels(labels, pairing, lambda),
            num_classes,
        ))
    } else {
        ops::mix_rows(&crate::data::one_hot(labels, num_classes), pairing, lambda)
    }
}

/// `z′ = λ_am·z_i + (1−λ_am)·z_j`, one augmented feature per row.
pub fn am_mix_features(
    z: &Tensor,
    labels: &[usize],
    num_classes: usize,
    lambda_am: f64,
    pairing: &[usize],
    one_sided: bool,
) -> Result<MixedBatch> {
    check_lambda(lambda_am, true)?;
    check_pairing(pairing, z.rows())?;
    if labels.len() != z.rows() {
        return Err(Error::shape(
            "am_mix_features",
            format!("{} labels for {} features", labels.len(), z.rows()),
        ));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::InvalidArgument(format!("label {l} outside 0..{num_classes}")));
    }
    Ok(MixedBatch {
        inputs_or_features: ops::mix_rows(z, pairing, lambda_am)?,
        target: am_targets(labels, num_classes, lambda_am, pairing, one_sided)?,
        lambda_used: lambda_am,
        pairing: pairing.to_vec(),
    })
}

/// `λ·CE(o, y_i) + (1−λ)·CE(o, y_j)`.
pub fn mixup_loss(logits: &Tensor, y_i: &Tensor, y_j: &Tensor, lambda: f64) -> Result<f64> {
    check_lambda(lambda, false)?;
    let (a, _) = softmax_xent(logits, y_i)?;
    let (b, _) = softmax_xent(logits, y_j)?;
    Ok(lambda * a + (1.0 - lambda) * b)
}

/// Cross entropy of augmented-feature logits against one-hot targets.
pub fn am_loss(logits: &Tensor, one_sided_target: &Tensor) -> Result<f64> {
    let c = one_sided_target.row_len();
    for (i, row) in one_sided_target.data().chunks(c).enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!("target row {i} is not one-hot")));
        }
    }
    Ok(softmax_xent(logits, one_sided_target)?.0)
}
