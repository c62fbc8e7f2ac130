use crate::error::{Error, Result};
use crate::model::{ActivationMaps, SplitLevel};
use crate::tensor::Tensor;

/// Labeled activation maps sent to the server, stacked along the batch
/// axis. A union keeps the contributing clients' items in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct MetadataSet {
    /// `n × c × h × w`.
    pub maps: Tensor,
    pub labels: Vec<usize>,
    pub source_level: SplitLevel,
    /// Items contributed by each client, in client order.
    pub per_client_counts: Vec<usize>,
}

impl MetadataSet {
    pub fn new(
        maps: Tensor,
        labels: Vec<usize>,
        source_level: SplitLevel,
        per_client_counts: Vec<usize>,
    ) -> Result<Self> {
        if maps.shape().len() != 4 || maps.batch() != labels.len() {
            return Err(Error::dim(format!(
                "metadata maps {:?} do not pair with {} labels",
                maps.shape(),
                labels.len()
            )));
        }
        if per_client_counts.iter().sum::<usize>() != labels.len() {
            return Err(Error::invalid("per-client counts do not add up to the item count"));
        }
        Ok(MetadataSet {
            maps,
            labels,
            source_level,
            per_client_counts,
        })
    }

    /// Every extracted map, unselected.
    pub fn from_activations(maps: ActivationMaps) -> Self {
        let n = maps.len();
        MetadataSet {
            maps: maps.maps,
            labels: maps.labels,
            source_level: maps.level,
            per_client_counts: vec![n],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        (0..self.len()).map(|i| (self.maps.sample(i), self.labels[i]))
    }

    /// Wire size with 32-bit map elements and a 32-bit label per item.
    pub fn bytes(&self) -> usize {
        self.len() * (self.maps.sample_len() * 4 + 4)
    }

    /// Concatenates per-client sets in the order given.
    pub fn union(parts: &[MetadataSet]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("no client metadata to combine"))?;
        if let Some(p) = parts.iter().find(|p| p.source_level != first.source_level) {
            return Err(Error::invalid(format!(
                "metadata from levels {} and {} cannot be combined",
                first.source_level, p.source_level
            )));
        }
        let maps: Vec<Tensor> = parts.iter().map(|p| p.maps.clone()).collect();
        MetadataSet::new(
            Tensor::concat(&maps)?,
            parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            first.source_level,
            parts.iter().flat_map(|p| p.per_client_counts.iter().copied()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_keeps_order_and_counts() {
        let a = MetadataSet::new(Tensor::filled(&[2, 1, 1, 1], 1.0), vec![0, 1], SplitLevel::G1, vec![2]).unwrap();
        let b = MetadataSet::new(Tensor::filled(&[1, 1, 1, 1], 2.0), vec![3], SplitLevel::G1, vec![1]).unwrap();
        let u = MetadataSet::union(&[a, b]).unwrap();
        assert_eq!(u.labels, vec![0, 1, 3]);
        assert_eq!(u.per_client_counts, vec![2, 1]);
        assert_eq!(u.maps.data(), &[1.0, 1.0, 2.0]);
        assert_eq!(u.bytes(), 3 * (4 + 4));
        assert_eq!(u.items().nth(2), Some((&[2.0][..], 3)));
    }

    #[test]
    fn union_rejects_mixed_levels() {
        let a = MetadataSet::new(Tensor::zeros(&[1, 1, 1, 1]), vec![0], SplitLevel::G1, vec![1]).unwrap();
        let b = MetadataSet::new(Tensor::zeros(&[1, 1, 1, 1]), vec![0], SplitLevel::G2, vec![1]).unwrap();
        assert!(MetadataSet::union(&[a, b]).is_err());
        assert!(MetadataSet::union(&[]).is_err());
    }
}
