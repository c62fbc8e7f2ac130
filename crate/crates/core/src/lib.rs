//! Deterministic simulator of split federated learning with
//! clustering-based metadata selection.
//!
//! Each round, clients receive the global model, extract activation maps at a
//! fixed split level, keep only the most representative maps (PCA + per-class
//! K-means medoids) and update the full model locally. The server trains the
//! upper part of the network on the collected maps, federated-averages the
//! client models and evaluates a model composed of the previous round's lower
//! part and the freshly trained upper part.
//!
//! Module map:
//!
//! * [`nn`]: tensors, layers, loss, SGD and gradient checking.
//! * [`model`]: the three-group CNN, split/compose at a level, activation extraction.
//! * [`selection`]: PCA, K-means and medoid selection.
//! * [`data`]: CIFAR-10 binary loader, synthetic generator, non-IID partitioning.
//! * [`fedsim`]: the round protocol and experiment driver.
//! * [`config`] and [`report`]: experiment configuration files and metric output.

pub mod config;
pub mod data;
pub mod error;
pub mod fedsim;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod report;
pub mod seed;
pub mod selection;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
