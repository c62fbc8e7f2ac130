use rand::seq::SliceRandom;

use super::engine::{backward_params, forward, infer};
use super::layers::LayerParams;
use super::loss::loss_softmax_ce;
use super::optim::{sgd_step, Hyperparams};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    /// Mean mini-batch loss over the final epoch, 0 when no epoch ran.
    pub last_epoch_loss: f64,
}

/// Mini-batch SGD over `inputs` for `hyper.epochs` epochs.
///
/// Each epoch visits the samples in a fresh permutation drawn from
/// `hyper.shuffle_seed` and the epoch index; the last partial batch is kept.
pub fn train_epochs(
    layers: &mut [LayerParams],
    inputs: &Tensor,
    labels: &[usize],
    hyper: &Hyperparams,
) -> Result<TrainSummary> {
    hyper.validate()?;
    let n = inputs.batch();
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for {n} samples", labels.len())));
    }
    let mut summary = TrainSummary::default();
    if n == 0 {
        return Ok(summary);
    }
    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng(derive_seed(hyper.shuffle_seed, &[epoch as u64])));
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for idx in order.chunks(hyper.batch_size) {
            let x = inputs.gather(idx)?;
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (logits, cache) = forward(layers, &x)?;
            let (loss, grad) = loss_softmax_ce(&logits, &y)?;
            let grads = backward_params(layers, &cache, &grad)?;
            sgd_step(layers, &grads, hyper)?;
            loss_sum += loss;
            batches += 1;
            summary.steps += 1;
        }
        summary.last_epoch_loss = loss_sum / batches as f64;
    }
    Ok(summary)
}

/// Mean cross-entropy of `layers` on a batch.
pub fn batch_loss(layers: &[LayerParams], inputs: &Tensor, labels: &[usize]) -> Result<f64> {
    let logits = infer(layers, inputs)?;
    Ok(loss_softmax_ce(&logits, labels)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;

    fn toy() -> (Vec<LayerParams>, Tensor, Vec<usize>) {
        let layers = vec![LayerParams {
            kind: LayerKind::Dense,
            weights: Tensor::new(vec![2, 2], vec![0.1, -0.2, 0.05, 0.3]).unwrap(),
            bias: Tensor::zeros(&[2]),
        }];
        let x = Tensor::new(
            vec![5, 2],
            vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.2, 0.8, 1.0, 0.1],
        )
        .unwrap();
        (layers, x, vec![0, 0, 1, 1, 0])
    }

    fn hyper(lr: f64, epochs: usize) -> Hyperparams {
        Hyperparams {
            learning_rate: lr,
            batch_size: 2,
            weight_decay: 0.0,
            epochs,
            shuffle_seed: 3,
        }
    }

    #[test]
    fn keeps_last_partial_batch() {
        let (mut l, x, y) = toy();
        let s = train_epochs(&mut l, &x, &y, &hyper(0.1, 4)).unwrap();
        assert_eq!(s.steps, 12);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (mut a, x, y) = toy();
        let mut b = a.clone();
        train_epochs(&mut a, &x, &y, &hyper(0.5, 3)).unwrap();
        train_epochs(&mut b, &x, &y, &hyper(0.5, 3)).unwrap();
        assert!(a[0].bitwise_eq(&b[0]));
    }

    #[test]
    fn training_lowers_loss() {
        let (mut l, x, y) = toy();
        let before = batch_loss(&l, &x, &y).unwrap();
        train_epochs(&mut l, &x, &y, &hyper(0.5, 50)).unwrap();
        assert!(batch_loss(&l, &x, &y).unwrap() < before);
    }
}
