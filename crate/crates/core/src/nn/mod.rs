//! Minimal neural-network engine: three layer kinds, softmax cross-entropy,
//! SGD with weight decay, and a finite-difference gradient checker.
//!
//! Activations are `n × c × h × w` tensors. Convolutions are 3×3 with
//! padding 1 and a fused ReLU; the dense layer global-average-pools spatial
//! input before its affine map and has no nonlinearity.

mod engine;
pub(crate) mod gemm;
mod gradcheck;
mod layers;
mod loss;
mod optim;
mod train;

pub use engine::{backward, forward, infer, output_shape, ForwardCache};
pub use gradcheck::grad_check;
pub use layers::{LayerGrads, LayerKind, LayerParams};
pub use loss::loss_softmax_ce;
pub use optim::{sgd_step, Hyperparams};
pub use train::{batch_loss, train_epochs, TrainSummary};
