//! Encoder/classifier models, the SGD optimizer, learning-rate schedules and
//! checkpoint files.

pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod schedule;

pub use model::{BoundParams, EncoderSpec, Model, ModelSpec, Trainable};
pub use optim::{sgd_step, Sgd};
pub use schedule::{lr_at, LrSchedule, ScheduleKind};
