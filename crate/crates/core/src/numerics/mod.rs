//! Dense fp64 tensors, the kernels the experiments need, a per-pass
//! differentiation tape and the seeded random source.

pub mod gradcheck;
pub mod ops;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use ops::{conv2d, flatten, matmul, maxpool2, relu, softmax, softmax_xent};
pub use rng::{beta_sample, Rng};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
