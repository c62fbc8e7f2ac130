use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{compose_weights, infer_chunked, ArchSpec, ModelWeights, SplitLevel};
use crate::nn::{train_epochs, Hyperparams, LayerParams, TrainSummary};

use super::MetadataSet;

/// Trains a copy of the full model on a client's data.
pub fn local_update(
    w: &ModelWeights,
    data: &LabeledDataset,
    hyper: &Hyperparams,
) -> Result<(ModelWeights, TrainSummary)> {
    let mut out = w.clone();
    let summary = train_epochs(out.layers_mut(), &data.images, &data.labels, hyper)?;
    Ok((out, summary))
}

/// Unweighted elementwise mean. Sums run in slice order.
pub fn fed_average(client_weights: &[ModelWeights]) -> Result<ModelWeights> {
    let first = client_weights
        .first()
        .ok_or_else(|| Error::Aggregation("no client models to average".into()))?;
    for (k, w) in client_weights.iter().enumerate().skip(1) {
        let same = w.arch() == first.arch()
            && w.layers().len() == first.layers().len()
            && w.layers().iter().zip(first.layers()).all(|(a, b)| {
                a.kind == b.kind
                    && a.weights.shape() == b.weights.shape()
                    && a.bias.shape() == b.bias.shape()
            });
        if !same {
            return Err(Error::Aggregation(format!(
                "client model {k} does not share the architecture of model 0"
            )));
        }
    }
    let m = client_weights.len() as f64;
    let mut out = first.clone();
    for (li, layer) in out.layers_mut().iter_mut().enumerate() {
        for w in &client_weights[1..] {
            let src = &w.layers()[li];
            for (a, b) in layer.weights.data_mut().iter_mut().zip(src.weights.data()) {
                *a += b;
            }
            for (a, b) in layer.bias.data_mut().iter_mut().zip(src.bias.data()) {
                *a += b;
            }
        }
        for v in layer.weights.data_mut().iter_mut().chain(layer.bias.data_mut()) {
            *v /= m;
        }
    }
    Ok(out)
}

/// Trains a fresh copy of `upper_init` on the metadata items.
pub fn metadata_training(
    upper_init: &[LayerParams],
    metadata: &MetadataSet,
    hyper: &Hyperparams,
) -> Result<(Vec<LayerParams>, TrainSummary)> {
    if metadata.is_empty() {
        return Err(Error::invalid("metadata set is empty; selection produced no items"));
    }
    let mut upper = upper_init.to_vec();
    let summary = train_epochs(&mut upper, &metadata.maps, &metadata.labels, hyper)?;
    Ok((upper, summary))
}

/// Evaluation model: the previous round's lower part under the freshly
/// trained upper part.
pub fn compose_global(
    arch: &ArchSpec,
    lower_prev: &[LayerParams],
    upper_trained: &[LayerParams],
    j: SplitLevel,
) -> Result<ModelWeights> {
    compose_weights(arch, lower_prev, upper_trained, j)
}

/// Index of the largest value, ties to the smallest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy of `predict`-style logits against labels.
pub fn accuracy_from_logits(logits: &crate::Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let classes = logits.sample_len();
    let correct = logits
        .data()
        .chunks(classes)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Top-1 accuracy on `test`.
pub fn evaluate(w: &ModelWeights, test: &LabeledDataset) -> Result<f64> {
    if test.images.sample_shape() != w.arch().input_shape.as_slice() {
        return Err(Error::dim(format!(
            "test samples have shape {:?}, model expects {:?}",
            test.images.sample_shape(),
            w.arch().input_shape
        )));
    }
    let logits = infer_chunked(w.layers(), &test.images)?;
    Ok(accuracy_from_logits(&logits, &test.labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;
    use crate::tensor::Tensor;

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn accuracy_counts_manual_cases() {
        let logits = Tensor::new(
            vec![4, 3],
            vec![
                2.0, 1.0, 0.0, // → 0
                0.0, 0.0, 5.0, // → 2
                1.0, 1.0, 0.0, // tie → 0
                -1.0, 3.0, 2.0, // → 1
            ],
        )
        .unwrap();
        assert_eq!(accuracy_from_logits(&logits, &[0, 2, 1, 2]), 0.5);
        assert_eq!(accuracy_from_logits(&logits, &[0, 2, 0, 1]), 1.0);
    }

    #[test]
    fn averaging_two_scalars() {
        let arch = ArchSpec {
            input_shape: [1, 2, 2],
            group_widths: [1, 1, 1],
            blocks_per_group: 1,
            num_classes: 2,
        };
        let mut a = ModelWeights::build(&arch, 0).unwrap();
        let mut b = a.clone();
        a.layers_mut()[0].weights.data_mut()[0] = 0.2;
        b.layers_mut()[0].weights.data_mut()[0] = 0.4;
        let avg = fed_average(&[a, b]).unwrap();
        assert!((avg.layers()[0].weights.data()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_metadata_is_rejected() {
        let upper = vec![LayerParams::zeros(LayerKind::Dense, 2, 2)];
        let empty = MetadataSet::new(Tensor::zeros(&[0, 2, 1, 1]), vec![], SplitLevel::G3, vec![]).unwrap();
        let h = Hyperparams {
            learning_rate: 0.1,
            batch_size: 4,
            weight_decay: 0.0,
            epochs: 1,
            shuffle_seed: 0,
        };
        assert!(matches!(metadata_training(&upper, &empty, &h), Err(Error::Validation(_))));
    }

    #[test]
    fn aggregation_rejects_arch_mismatch() {
        let a1 = ArchSpec {
            input_shape: [1, 4, 4],
            group_widths: [2, 2, 2],
            blocks_per_group: 1,
            num_classes: 2,
        };
        let a2 = ArchSpec {
            group_widths: [2, 2, 3],
            ..a1.clone()
        };
        let w1 = ModelWeights::build(&a1, 0).unwrap();
        let w2 = ModelWeights::build(&a2, 0).unwrap();
        assert!(matches!(fed_average(&[w1, w2]), Err(Error::Aggregation(_))));
        assert!(matches!(fed_average(&[]), Err(Error::Aggregation(_))));
    }
}
