use super::engine::{backward, forward};
use super::layers::LayerParams;
use super::loss::loss_softmax_ce;
use super::train::batch_loss;
use crate::error::Result;
use crate::tensor::Tensor;

/// Largest relative disagreement between backprop gradients and central
/// finite differences of the cross-entropy loss, over every parameter.
///
/// The relative error of one parameter is
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check(layers: &[LayerParams], batch: &Tensor, labels: &[usize], eps: f64) -> Result<f64> {
    let (logits, cache) = forward(layers, batch)?;
    let (_, grad) = loss_softmax_ce(&logits, labels)?;
    let (grads, _) = backward(layers, &cache, &grad)?;

    let mut probe = layers.to_vec();
    let mut worst = 0.0f64;
    for li in 0..layers.len() {
        for part in 0..2 {
            let len = if part == 0 {
                layers[li].weights.len()
            } else {
                layers[li].bias.len()
            };
            for i in 0..len {
                let orig = *param_mut(&mut probe, li, part, i);
                *param_mut(&mut probe, li, part, i) = orig + eps;
                let plus = batch_loss(&probe, batch, labels)?;
                *param_mut(&mut probe, li, part, i) = orig - eps;
                let minus = batch_loss(&probe, batch, labels)?;
                *param_mut(&mut probe, li, part, i) = orig;

                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = if part == 0 {
                    grads[li].weights.data()[i]
                } else {
                    grads[li].bias.data()[i]
                };
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}

fn param_mut(layers: &mut [LayerParams], layer: usize, part: usize, i: usize) -> &mut f64 {
    let t = if part == 0 {
        &mut layers[layer].weights
    } else {
        &mut layers[layer].bias
    };
    &mut t.data_mut()[i]
}
