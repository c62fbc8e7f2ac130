use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};
use crate::tensor::Tensor;

/// Per-class spatial templates drawn once from a seed; samples are a
/// template plus clamped Gaussian noise.
#[derive(Clone, Debug)]
pub struct SyntheticGenerator {
    shape: [usize; 3],
    templates: Vec<Vec<f64>>,
}

const BLOBS_PER_CHANNEL: usize = 3;

impl SyntheticGenerator {
    /// Each template is a dim background plus a few Gaussian blobs per channel
    /// with random centre, width and amplitude.
    pub fn new(num_classes: usize, shape: [usize; 3], seed: u64) -> Result<Self> {
        if num_classes == 0 || shape.iter().any(|&d| d == 0) {
            return Err(Error::config(format!(
                "synthetic data needs positive classes and shape, got {num_classes} and {shape:?}"
            )));
        }
        let [c, h, w] = shape;
        let templates = (0..num_classes)
            .map(|class| {
                let mut r = rng(derive_seed(seed, &[0x7e47, class as u64]));
                let mut t = vec![0.1; c * h * w];
                for plane in t.chunks_mut(h * w) {
                    for _ in 0..BLOBS_PER_CHANNEL {
                        let cy = r.random_range(0.0..h as f64);
                        let cx = r.random_range(0.0..w as f64);
                        let sigma = r.random_range(0.12..0.25) * h.max(w) as f64;
                        let amp = r.random_range(0.4..0.9);
                        for y in 0..h {
                            for x in 0..w {
                                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                                plane[y * w + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                            }
                        }
                    }
                }
                for v in &mut t {
                    *v = v.clamp(0.0, 1.0);
                }
                t
            })
            .collect();
        Ok(SyntheticGenerator { shape, templates })
    }

    pub fn num_classes(&self) -> usize {
        self.templates.len()
    }

    pub fn template(&self, class: usize) -> &[f64] {
        &self.templates[class]
    }

    /// `n_per_class` samples of every class, interleaved so that sample `i`
    /// has label `i % num_classes`.
    pub fn sample(&self, n_per_class: usize, noise_sigma: f64, seed: u64) -> Result<LabeledDataset> {
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::config(format!("noise_sigma must be non-negative, got {noise_sigma}")));
        }
        let classes = self.num_classes();
        let n = classes * n_per_class;
        let len: usize = self.shape.iter().product();
        let noise = Normal::new(0.0, noise_sigma).expect("valid standard deviation");
        let mut r = rng(derive_seed(seed, &[0x5a3b]));
        let mut data = Vec::with_capacity(n * len);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % classes;
            labels.push(class);
            if noise_sigma == 0.0 {
                data.extend_from_slice(&self.templates[class]);
            } else {
                data.extend(
                    self.templates[class]
                        .iter()
                        .map(|&t| (t + noise.sample(&mut r)).clamp(0.0, 1.0)),
                );
            }
        }
        let [c, h, w] = self.shape;
        LabeledDataset::new(Tensor::new(vec![n, c, h, w], data)?, labels, classes)
    }
}

/// Templates and noise both drawn from `seed`.
pub fn gen_synthetic(
    num_classes: usize,
    n_per_class: usize,
    shape: [usize; 3],
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    SyntheticGenerator::new(num_classes, shape, seed)?.sample(n_per_class, noise_sigma, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_samples_equal_their_template() {
        let d = gen_synthetic(3, 4, [1, 8, 8], 0.0, 5).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.images.sample(i), d.images.sample(i % 3));
        }
        assert_ne!(d.images.sample(0), d.images.sample(1));
    }

    #[test]
    fn counts_and_balance() {
        let d = gen_synthetic(10, 100, [1, 8, 8], 0.1, 1).unwrap();
        assert_eq!(d.len(), 1000);
        assert_eq!(d.class_counts(), vec![100; 10]);
        assert!(d.images.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(4, 5, [3, 4, 4], 0.2, 9).unwrap();
        let b = gen_synthetic(4, 5, [3, 4, 4], 0.2, 9).unwrap();
        let c = gen_synthetic(4, 5, [3, 4, 4], 0.2, 10).unwrap();
        assert!(a.images.bitwise_eq(&b.images));
        assert!(!a.images.bitwise_eq(&c.images));
    }

    #[test]
    fn nearest_template_classifies_low_noise_draws() {
        let g = SyntheticGenerator::new(10, [1, 8, 8], 21).unwrap();
        let held_out = g.sample(100, 0.05, 22).unwrap();
        let correct = (0..held_out.len())
            .filter(|&i| {
                let x = held_out.images.sample(i);
                let best = (0..10)
                    .min_by(|&a, &b| {
                        let da: f64 = x.iter().zip(g.template(a)).map(|(p, q)| (p - q).powi(2)).sum();
                        let db: f64 = x.iter().zip(g.template(b)).map(|(p, q)| (p - q).powi(2)).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                best == held_out.labels[i]
            })
            .count();
        assert!(correct as f64 / held_out.len() as f64 >= 0.99, "{correct}/1000");
    }
}
