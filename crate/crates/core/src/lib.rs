//! Training laboratory for feature-space mixup variants and the collapse
//! diagnostics used to compare them.
//!
//! * [`numerics`]: fp64 tensors, kernels, differentiation tape, seeded RNG.
//! * [`network`]: encoder/classifier models, SGD with momentum, LR schedules,
//!   checkpoints.
//! * [`augment`]: mixup, manifold mixup and asymptotic midpoint mixup (AM-mixup)
//!   with their losses and rate scheduler.
//! * [`metrics`]: alignment, inter-class and neighborhood uniformity, split
//!   accuracies.
//! * [`data`]: toy datasets, long-tail subsampling, coarse label maps, file IO.
//! * [`harness`]: training loop, imbalanced and coarse-to-fine protocols,
//!   ablation grid, config files and run outputs.

pub mod augment;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{Rng, Tensor};
