use rand::Rng;

use super::SelectionConfig;
use crate::error::{Error, Result};
use crate::parallel;
use crate::seed::{derive_seed, rng};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    /// `k × d`.
    pub centroids: Tensor,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    /// Inertia after the initial assignment and after every iteration.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KmeansResult {
    pub fn k(&self) -> usize {
        self.centroids.batch()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const ASSIGN_CHUNK: usize = 512;

/// Nearest centroid for every point, ties to the smallest index.
fn nearest(points: &Tensor, centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    parallel::map_chunks(points.batch(), ASSIGN_CHUNK, |r| {
        r.map(|i| {
            let p = points.sample(i);
            let mut best = (0, dist2(p, &centroids[0]));
            for (c, cent) in centroids.iter().enumerate().skip(1) {
                let d = dist2(p, cent);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect::<Vec<_>>()
    })
    .concat()
}

/// Greedy k-means++ seeding: each new centre is the best of a few candidates
/// drawn with probability proportional to squared distance.
fn seed_centroids(points: &Tensor, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = points.batch();
    let mut r = rng(seed);
    let first = r.random_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(points.sample(i), points.sample(first))).collect();
    let trials = 2 + (k as f64).ln().floor() as usize;
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // Every point coincides with a centre already.
            let next = (0..n).find(|i| !chosen.contains(i)).unwrap_or(first);
            chosen.push(next);
            continue;
        }
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let target = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut cand = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    cand = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            let cand = cand.expect("positive total implies a positive weight");
            let next: Vec<f64> = d2
                .iter()
                .enumerate()
                .map(|(i, &w)| w.min(dist2(points.sample(i), points.sample(cand))))
                .collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((cand, potential, next));
            }
        }
        let (cand, _, next) = best.expect("at least one trial");
        chosen.push(cand);
        d2 = next;
    }
    chosen.iter().map(|&i| points.sample(i).to_vec()).collect()
}

fn cluster_means(points: &Tensor, assignments: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = points.sample_len();
    let k = previous.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(points.sample(i)) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((mut s, c), prev)| {
            if c == 0 {
                prev.clone()
            } else {
                for v in &mut s {
                    *v /= c as f64;
                }
                s
            }
        })
        .collect()
}

/// Moves each empty cluster's centroid onto the point farthest from its own
/// centroid, taken from a cluster with at least two members. Returns whether
/// anything moved.
fn reseed_empty(points: &Tensor, centroids: &mut [Vec<f64>], assign: &mut [(usize, f64)]) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &(a, _) in assign.iter() {
        sizes[a] += 1;
    }
    let mut moved = false;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let far = assign
            .iter()
            .enumerate()
            .filter(|(_, &(a, d))| sizes[a] > 1 && d > 0.0)
            .fold(None::<(usize, f64)>, |best, (i, &(_, d))| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((p, _)) = far else { break };
        sizes[assign[p].0] -= 1;
        sizes[c] = 1;
        assign[p] = (c, 0.0);
        centroids[c] = points.sample(p).to_vec();
        moved = true;
    }
    moved
}

fn inertia(assign: &[(usize, f64)]) -> f64 {
    assign.iter().map(|&(_, d)| d).sum()
}

/// Lloyd's algorithm from greedy k-means++ seeds, run `cfg.n_init` times.
/// The first start uses `cfg.seed` itself and later ones derive their seed
/// from it. The result with the lowest final inertia is kept, ties to the
/// earliest start.
///
/// Each run stops when an iteration leaves every assignment unchanged (a fixed point:
/// each point sits with its nearest centroid and each non-empty centroid is
/// its cluster mean), when the largest centroid shift is at most `cfg.tol`,
/// or after `cfg.max_iter` iterations.
pub fn kmeans_fit(points: &Tensor, k: usize, cfg: &SelectionConfig) -> Result<KmeansResult> {
    let n = points.batch();
    if n == 0 {
        return Err(Error::invalid("K-means needs at least one point"));
    }
    if k == 0 {
        return Err(Error::invalid("K-means needs k ≥ 1"));
    }
    let mut best: Option<KmeansResult> = None;
    for start in 0..cfg.n_init.max(1) {
        let seed = if start == 0 { cfg.seed } else { derive_seed(cfg.seed, &[start as u64]) };
        let run = lloyd(points, k, seed, cfg)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

fn lloyd(points: &Tensor, k: usize, seed: u64, cfg: &SelectionConfig) -> Result<KmeansResult> {
    let mut centroids = seed_centroids(points, k, seed);
    let mut assign = nearest(points, &centroids);
    reseed_empty(points, &mut centroids, &mut assign);
    let mut trace = vec![inertia(&assign)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let labels: Vec<usize> = assign.iter().map(|a| a.0).collect();
        let next = cluster_means(points, &labels, &centroids);
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let fresh = nearest(points, &centroids);
        let mut changed = fresh.iter().zip(&assign).any(|(a, b)| a.0 != b.0);
        assign = fresh;
        changed |= reseed_empty(points, &mut centroids, &mut assign);
        trace.push(inertia(&assign));
        if !changed || shift <= cfg.tol {
            converged = true;
            break;
        }
    }
    let d = points.sample_len();
    Ok(KmeansResult {
        centroids: Tensor::new(vec![k, d], centroids.concat())?,
        assignments: assign.iter().map(|a| a.0).collect(),
        inertia: *trace.last().expect("trace starts non-empty"),
        inertia_trace: trace,
        iterations,
        converged,
    })
}
