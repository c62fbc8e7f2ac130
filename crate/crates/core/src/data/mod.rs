//! Datasets: the CIFAR-10 binary format, a seeded synthetic stand-in, and
//! non-IID client partitioning.

mod cifar;
mod partition;
mod synthetic;

pub use cifar::{load_cifar10, read_records, write_records, CIFAR_FILE_BYTES, CIFAR_RECORDS_PER_FILE};
pub use partition::{partition_noniid, PartitionPlan};
pub use synthetic::{gen_synthetic, SyntheticGenerator};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Images in `[0, 1]` with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    /// `n × c × h × w`.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.shape().len() != 4 {
            return Err(Error::dim(format!(
                "images must be n × c × h × w, got {:?}",
                images.shape()
            )));
        }
        if images.batch() != labels.len() {
            return Err(Error::dim(format!(
                "{} images but {} labels",
                images.batch(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(LabeledDataset {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample `[c, h, w]`.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.sample_shape();
        [s[0], s[1], s[2]]
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(LabeledDataset {
            images: self.images.gather(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_labels_and_shape() {
        let imgs = Tensor::zeros(&[2, 1, 2, 2]);
        assert!(LabeledDataset::new(imgs.clone(), vec![0, 1], 2).is_ok());
        assert!(matches!(
            LabeledDataset::new(imgs.clone(), vec![0, 2], 2),
            Err(Error::Validation(_))
        ));
        assert!(LabeledDataset::new(imgs, vec![0], 2).is_err());
        assert!(LabeledDataset::new(Tensor::zeros(&[2, 4]), vec![0, 1], 2).is_err());
    }
}
