//! Representative-sample selection: PCA to compress flattened activation
//! maps, K-means per class in the reduced space, and the medoid of each
//! cluster as its representative.

mod kmeans;
mod pca;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans_fit, KmeansResult};
pub use pca::{pca_fit, pca_transform, PcaModel};

use crate::error::{Error, Result};
use crate::fedsim::MetadataSet;
use crate::model::ActivationMaps;
use crate::seed::derive_seed;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_components: usize,
    pub clusters_per_class: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent seeded starts; the run with the lowest inertia wins.
    pub n_init: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            n_components: 200,
            clusters_per_class: 20,
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
            n_init: 10,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::config("selection.n_components must be positive"));
        }
        if self.clusters_per_class == 0 {
            return Err(Error::config("selection.clusters_per_class must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("selection.max_iter must be positive"));
        }
        if self.n_init == 0 {
            return Err(Error::config("selection.n_init must be positive"));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::config("selection.tol must be non-negative"));
        }
        Ok(())
    }
}

/// For each non-empty cluster, the index of the point closest to its
/// centroid (ties to the smallest index), in cluster order.
pub fn select_medoids(points: &Tensor, result: &KmeansResult) -> Vec<usize> {
    let k = result.k();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; k];
    for (i, &c) in result.assignments.iter().enumerate() {
        let d = kmeans::dist2(points.sample(i), result.centroids.sample(c));
        match best[c] {
            Some((_, bd)) if bd <= d => {}
            _ => best[c] = Some((i, d)),
        }
    }
    best.into_iter().flatten().map(|(i, _)| i).collect()
}

/// Picks the representative maps of one client.
///
/// A PCA model is fitted on all of the client's flattened maps. Within each
/// class, the reduced vectors are clustered into `clusters_per_class`
/// groups and each group's medoid is kept; a class with no more samples than
/// that keeps every sample. The result holds the original maps, in
/// ascending sample order.
pub fn client_select_metadata(maps: &ActivationMaps, cfg: &SelectionConfig) -> Result<MetadataSet> {
    let selected = select_indices(maps, cfg)?;
    MetadataSet::new(
        maps.maps.gather(&selected)?,
        selected.iter().map(|&i| maps.labels[i]).collect(),
        maps.level,
        vec![selected.len()],
    )
}

/// Sample indices chosen by [`client_select_metadata`], ascending.
pub fn select_indices(maps: &ActivationMaps, cfg: &SelectionConfig) -> Result<Vec<usize>> {
    if maps.is_empty() {
        return Err(Error::invalid("no activation maps to select from"));
    }
    cfg.validate()?;
    let k = cfg.clusters_per_class;
    let classes = maps.labels.iter().copied().max().unwrap_or(0) + 1;
    let mut by_class = vec![Vec::new(); classes];
    for (i, &y) in maps.labels.iter().enumerate() {
        by_class[y].push(i);
    }

    let reduced = if by_class.iter().any(|idx| idx.len() > k) {
        let flat = maps.maps.clone().reshape(vec![maps.len(), maps.maps.sample_len()])?;
        let model = pca_fit(&flat, cfg.n_components)?;
        Some(pca_transform(&model, &flat)?)
    } else {
        None
    };

    let mut selected = Vec::new();
    for (class, idx) in by_class.iter().enumerate() {
        if idx.len() <= k {
            selected.extend_from_slice(idx);
            continue;
        }
        let points = reduced.as_ref().expect("reduced when a class exceeds k").gather(idx)?;
        let class_cfg = SelectionConfig {
            seed: derive_seed(cfg.seed, &[class as u64]),
            ..cfg.clone()
        };
        let km = kmeans_fit(&points, k, &class_cfg)?;
        selected.extend(select_medoids(&points, &km).into_iter().map(|m| idx[m]));
    }
    selected.sort_unstable();
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SplitLevel;

    fn km(points: &Tensor, centroids: Vec<f64>, assignments: Vec<usize>) -> KmeansResult {
        let k = centroids.len() / points.sample_len();
        KmeansResult {
            centroids: Tensor::new(vec![k, points.sample_len()], centroids).unwrap(),
            assignments,
            inertia: 0.0,
            inertia_trace: vec![],
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn medoid_rules() {
        let pts = Tensor::new(vec![3, 1], vec![0.0, 2.0, 10.0]).unwrap();
        assert_eq!(select_medoids(&pts, &km(&pts, vec![4.0], vec![0, 0, 0])), vec![1]);
        let pair = Tensor::new(vec![2, 1], vec![0.0, 1.0]).unwrap();
        assert_eq!(select_medoids(&pair, &km(&pair, vec![0.5], vec![0, 0])), vec![0]);
        let single = Tensor::new(vec![2, 1], vec![5.0, 9.0]).unwrap();
        assert_eq!(
            select_medoids(&single, &km(&single, vec![5.0, 9.0, 0.0], vec![0, 1])),
            vec![0, 1]
        );
    }

    fn maps(n: usize, labels: Vec<usize>) -> ActivationMaps {
        let data = (0..n * 8).map(|i| ((i * 7919 + 13) % 97) as f64 / 97.0).collect();
        ActivationMaps {
            maps: Tensor::new(vec![n, 2, 2, 2], data).unwrap(),
            labels,
            level: SplitLevel::G2,
        }
    }

    #[test]
    fn small_classes_are_kept_whole() {
        let m = maps(3, vec![0, 0, 0]);
        let cfg = SelectionConfig::default();
        let set = client_select_metadata(&m, &cfg).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.maps.bitwise_eq(&m.maps));
    }

    #[test]
    fn count_is_capped_sum_over_classes() {
        let labels: Vec<usize> = (0..40).map(|i| if i < 30 { 1 } else { 4 }).collect();
        let m = maps(40, labels);
        let cfg = SelectionConfig {
            clusters_per_class: 5,
            n_components: 3,
            ..SelectionConfig::default()
        };
        let set = client_select_metadata(&m, &cfg).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.labels.iter().filter(|&&y| y == 1).count(), 5);
        assert_eq!(set.per_client_counts, vec![10]);
    }

    #[test]
    fn rejects_empty_maps() {
        let m = ActivationMaps {
            maps: Tensor::zeros(&[0, 1, 1, 1]),
            labels: vec![],
            level: SplitLevel::G1,
        };
        assert!(matches!(
            client_select_metadata(&m, &SelectionConfig::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_zero_clusters() {
        let cfg = SelectionConfig {
            clusters_per_class: 0,
            ..SelectionConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
