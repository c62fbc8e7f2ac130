use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

/// Sample indices into a parent dataset, one list per client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub client_indices: Vec<Vec<usize>>,
    /// Classes drawn for each client, ascending.
    pub client_classes: Vec<Vec<usize>>,
    pub classes_per_client: usize,
    pub samples_per_client: usize,
    /// Samples short of `samples_per_client` per client when class supply ran out.
    pub shortfall: Vec<usize>,
}

impl PartitionPlan {
    pub fn num_clients(&self) -> usize {
        self.client_indices.len()
    }

    pub fn total_samples(&self) -> usize {
        self.client_indices.iter().map(Vec::len).sum()
    }
}

/// Splits `total` as evenly as possible over classes with limited supply.
fn quotas(total: usize, supply: &[usize]) -> Vec<usize> {
    let k = supply.len();
    let mut take: Vec<usize> = (0..k)
        .map(|i| (total / k + usize::from(i < total % k)).min(supply[i]))
        .collect();
    let mut missing = total - take.iter().sum::<usize>();
    while missing > 0 {
        let open: Vec<usize> = (0..k).filter(|&i| take[i] < supply[i]).collect();
        if open.is_empty() {
            break;
        }
        let share = missing.div_ceil(open.len());
        for i in open {
            let add = share.min(supply[i] - take[i]).min(missing);
            take[i] += add;
            missing -= add;
        }
    }
    take
}

/// Gives every client `classes_per_client` distinct random classes and
/// `samples_per_client` samples drawn without replacement from them, split
/// evenly across the classes where supply allows. Draws for different
/// clients are independent, so clients may share samples.
pub fn partition_noniid(
    dataset: &LabeledDataset,
    num_clients: usize,
    classes_per_client: usize,
    samples_per_client: usize,
    seed: u64,
) -> Result<PartitionPlan> {
    if num_clients < 1 {
        return Err(Error::invalid("num_clients must be at least 1"));
    }
    if classes_per_client < 1 || classes_per_client > dataset.num_classes {
        return Err(Error::invalid(format!(
            "classes_per_client must be in 1..={}, got {classes_per_client}",
            dataset.num_classes
        )));
    }
    if samples_per_client < 1 {
        return Err(Error::invalid("samples_per_client must be at least 1"));
    }
    let mut by_class = vec![Vec::new(); dataset.num_classes];
    for (i, &y) in dataset.labels.iter().enumerate() {
        by_class[y].push(i);
    }

    let mut plan = PartitionPlan {
        client_indices: Vec::with_capacity(num_clients),
        client_classes: Vec::with_capacity(num_clients),
        classes_per_client,
        samples_per_client,
        shortfall: Vec::with_capacity(num_clients),
    };
    for client in 0..num_clients {
        let mut r = rng(derive_seed(seed, &[client as u64]));
        let mut classes = index::sample(&mut r, dataset.num_classes, classes_per_client).into_vec();
        classes.sort_unstable();
        let supply: Vec<usize> = classes.iter().map(|&c| by_class[c].len()).collect();
        let take = quotas(samples_per_client, &supply);
        let mut picked = Vec::with_capacity(samples_per_client);
        for (&c, &t) in classes.iter().zip(&take) {
            let pool = &by_class[c];
            picked.extend(index::sample(&mut r, pool.len(), t).into_iter().map(|i| pool[i]));
        }
        picked.sort_unstable();
        plan.shortfall.push(samples_per_client - picked.len());
        plan.client_indices.push(picked);
        plan.client_classes.push(classes);
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use std::collections::BTreeSet;

    #[test]
    fn quota_split_is_even_then_fills() {
        assert_eq!(quotas(2500, &[5000, 5000]), vec![1250, 1250]);
        assert_eq!(quotas(5, &[10, 10]), vec![3, 2]);
        assert_eq!(quotas(10, &[2, 20]), vec![2, 8]);
        assert_eq!(quotas(10, &[2, 3]), vec![2, 3]);
    }

    #[test]
    fn paper_sized_partition() {
        let d = gen_synthetic(10, 5000, [1, 2, 2], 0.1, 0).unwrap();
        let plan = partition_noniid(&d, 20, 2, 2500, 42).unwrap();
        assert_eq!(plan.num_clients(), 20);
        for idx in &plan.client_indices {
            assert_eq!(idx.len(), 2500);
            let labels: BTreeSet<usize> = idx.iter().map(|&i| d.labels[i]).collect();
            assert_eq!(labels.len(), 2);
            let unique: BTreeSet<usize> = idx.iter().copied().collect();
            assert_eq!(unique.len(), 2500);
        }
        assert!(plan.shortfall.iter().all(|&s| s == 0));
    }

    #[test]
    fn single_client_takes_everything() {
        let d = gen_synthetic(4, 25, [1, 2, 2], 0.1, 0).unwrap();
        let plan = partition_noniid(&d, 1, 4, d.len(), 3).unwrap();
        assert_eq!(plan.client_indices[0], (0..d.len()).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_and_records_shortfall() {
        let d = gen_synthetic(3, 10, [1, 2, 2], 0.1, 0).unwrap();
        let a = partition_noniid(&d, 4, 2, 30, 8).unwrap();
        let b = partition_noniid(&d, 4, 2, 30, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.shortfall.iter().all(|&s| s == 10));
    }

    #[test]
    fn rejects_zero_clients() {
        let d = gen_synthetic(3, 10, [1, 2, 2], 0.1, 0).unwrap();
        assert!(matches!(partition_noniid(&d, 0, 2, 5, 0), Err(Error::Validation(_))));
        assert!(partition_noniid(&d, 1, 4, 5, 0).is_err());
    }
}
