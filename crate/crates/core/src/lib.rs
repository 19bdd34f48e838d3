//! Grayscale image denoising with U-Net and U-Net++ trained under single-worker,
//! DataParallel-style and DDP-style data parallelism.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` for training, `f64`
//! for gradient oracles); the aliases below name the common instantiations.

pub mod amp;
pub mod binary16;
pub mod checkpoint;
pub mod data;
pub mod dist;
pub mod error;
pub mod gradcheck;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use dist::{train, EpochStats, ExecMode, TrainConfig};
pub use error::{Error, Result};
pub use model::{Arch, Graph, ModelConfig};
pub use scalar::{DType, Scalar};
pub use tape::{Grads, Tape, Var};
pub use tensor::{Fill, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
pub type Graph32 = Graph<f32>;
pub type Graph64 = Graph<f64>;
