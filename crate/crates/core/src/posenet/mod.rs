//! Convolutional pose regressor, implemented from scratch: forward pass,
//! backpropagation and Adam.
//!
//! The network maps a `height × width × 2` displacement field to
//! `(theta_f, theta_g)` in degrees. Parameters live in one flat `f32` vector
//! with per-layer offsets; the kernels are generic so gradients can also be
//! evaluated in `f64`.

mod kernels;
mod model;
mod spec;
mod train;

pub use kernels::{backward, forward, Mode, Scalar, Trace};
pub use model::{PoseExample, PoseModel, PoseSample, TrainingMeta};
pub use spec::{Activation, InputShape, LayerPlan, LayerSpec, NetworkSpec, Shape};
pub use train::{evaluate, fit, train, train_split, EpochLoss, Evaluation, TrainConfig, TrainReport};
