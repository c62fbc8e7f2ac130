use serde::{Deserialize, Serialize};

use super::layers::{LayerGrads, LayerParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub shuffle_seed: u64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(format!(
                "learning_rate must be a non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, shuffle_seed: u64) -> Self {
        Hyperparams {
            shuffle_seed,
            ..self.clone()
        }
    }
}

/// `w ← w − lr·(g + weight_decay·w)` over every parameter tensor.
pub fn sgd_step(params: &mut [LayerParams], grads: &[LayerGrads], hyper: &Hyperparams) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim(format!(
            "{} gradient sets for {} layers",
            grads.len(),
            params.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.weights.shape() != g.weights.shape() || p.bias.shape() != g.bias.shape() {
            return Err(Error::dim(format!(
                "gradient shapes {:?}/{:?} do not match parameters {:?}/{:?}",
                g.weights.shape(),
                g.bias.shape(),
                p.weights.shape(),
                p.bias.shape()
            )));
        }
    }
    let lr = hyper.learning_rate;
    let wd = hyper.weight_decay;
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, &d) in p.weights.data_mut().iter_mut().zip(g.weights.data()) {
            *w -= lr * (d + wd * *w);
        }
        for (w, &d) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
            *w -= lr * (d + wd * *w);
        }
    }
    Ok(())
}
