use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a `batch × classes` logit matrix.
///
/// Returns the loss and its gradient `(softmax − one_hot) / batch`.
pub fn loss_softmax_ce(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let &[n, classes] = logits.shape() else {
        return Err(Error::dim(format!(
            "logits must be batch × classes, got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    if n == 0 {
        return Ok((0.0, Tensor::zeros(&[0, classes])));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; n * classes];
    let mut total = 0.0;
    for ((row, g), &y) in logits.data().chunks(classes).zip(grad.chunks_mut(classes)).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (gi, &z) in g.iter_mut().zip(row) {
            *gi = (z - max).exp();
            sum += *gi;
        }
        total += sum.ln() + max - row[y];
        for gi in g.iter_mut() {
            *gi = *gi / sum * inv_n;
        }
        g[y] -= inv_n;
    }
    Ok((total * inv_n, Tensor::new(vec![n, classes], grad)?))
}
