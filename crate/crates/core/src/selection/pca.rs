use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::nn::gemm::{gemm, View};
use crate::tensor::Tensor;

/// Principal axes of a sample matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `n_components × d`, orthonormal rows.
    pub components: Tensor,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits PCA to the rows of `x` (every sample flattened). The number of
/// components is `min(n_components, n − 1, d)`.
///
/// Uses the `d × d` covariance when `d ≤ n` and the `n × n` Gram matrix
/// otherwise. Directions with numerically zero variance are completed to
/// an orthonormal set.
pub fn pca_fit(x: &Tensor, n_components: usize) -> Result<PcaModel> {
    let n = x.batch();
    let d = x.sample_len();
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 samples, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("PCA needs at least one feature"));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.sample(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut xc = x.data().to_vec();
    for row in xc.chunks_mut(d) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let keep = n_components.min(n - 1).min(d);
    let scale = 1.0 / (n - 1) as f64;

    let mut rows: Vec<Option<Vec<f64>>> = Vec::with_capacity(keep);
    let mut variance = Vec::with_capacity(keep);
    if d <= n {
        let mut cov = vec![0.0; d * d];
        gemm(scale, View::rows(&xc, n, d).t(), View::rows(&xc, n, d), 0.0, &mut cov);
        let (values, vectors) = sorted_eigen(cov, d);
        for &(lambda, col) in values.iter().take(keep) {
            rows.push(Some(vectors.column(col).iter().copied().collect()));
            variance.push(lambda.max(0.0));
        }
    } else {
        let mut gram = vec![0.0; n * n];
        gemm(1.0, View::rows(&xc, n, d), View::rows(&xc, n, d).t(), 0.0, &mut gram);
        let (values, vectors) = sorted_eigen(gram, n);
        let floor = values.first().map_or(0.0, |v| v.0) * 1e-12;
        for &(lambda, col) in values.iter().take(keep) {
            if lambda > floor && lambda > 0.0 {
                let u: Vec<f64> = vectors.column(col).iter().copied().collect();
                let mut v = vec![0.0; d];
                gemm(1.0 / lambda.sqrt(), View::rows(&xc, n, d).t(), View::rows(&u, n, 1), 0.0, &mut v);
                rows.push(Some(v));
                variance.push(lambda * scale);
            } else {
                rows.push(None);
                variance.push(0.0);
            }
        }
    }

    let components = orthonormalize(rows, d);
    for i in 1..variance.len() {
        variance[i] = variance[i].min(variance[i - 1]);
    }
    Ok(PcaModel {
        mean,
        components: Tensor::new(vec![keep, d], components)?,
        explained_variance: variance,
    })
}

/// Eigen-decomposition of a symmetric row-major matrix, eigenvalues
/// descending as `(value, column)` pairs.
fn sorted_eigen(m: Vec<f64>, size: usize) -> (Vec<(f64, usize)>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(size, size, &m));
    let mut values: Vec<(f64, usize)> = eig.eigenvalues.iter().copied().zip(0..).collect();
    values.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    (values, eig.eigenvectors)
}

/// Modified Gram-Schmidt (two passes) in the given order. Missing or
/// collapsed rows are replaced by the first canonical basis vectors that
/// remain independent. Each row is then signed so its largest-magnitude
/// entry is positive.
fn orthonormalize(rows: Vec<Option<Vec<f64>>>, d: usize) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut next_canonical = 0;
    for row in rows {
        let mut accepted = row.and_then(|v| project_out(v, &basis, 1e-6));
        while accepted.is_none() {
            assert!(next_canonical < d, "ran out of basis vectors");
            let mut e = vec![0.0; d];
            e[next_canonical] = 1.0;
            next_canonical += 1;
            accepted = project_out(e, &basis, 1e-3);
        }
        basis.push(accepted.expect("accepted above"));
    }
    for v in &mut basis {
        let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
    basis.concat()
}

fn project_out(mut v: Vec<f64>, basis: &[Vec<f64>], min_norm: f64) -> Option<Vec<f64>> {
    let start = norm(&v);
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
    }
    let len = norm(&v);
    if len <= min_norm * start {
        return None;
    }
    for x in &mut v {
        *x /= len;
    }
    Some(v)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects rows of `x` onto the model's components: `(x − mean)·Cᵀ`.
pub fn pca_transform(model: &PcaModel, x: &Tensor) -> Result<Tensor> {
    let d = model.dim();
    if x.sample_len() != d {
        return Err(Error::invalid(format!(
            "PCA model has {d} features, input has {}",
            x.sample_len()
        )));
    }
    let m = x.batch();
    let k = model.n_components();
    let mut centered = x.data().to_vec();
    for row in centered.chunks_mut(d) {
        for (v, mu) in row.iter_mut().zip(&model.mean) {
            *v -= mu;
        }
    }
    let mut out = vec![0.0; m * k];
    gemm(
        1.0,
        View::rows(&centered, m, d),
        View::rows(model.components.data(), k, d).t(),
        0.0,
        &mut out,
    );
    Tensor::new(vec![m, k], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, d: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(vec![n, d], data).unwrap()
    }

    #[test]
    fn points_on_diagonal() {
        let x = mat(4, 2, vec![0., 0., 1., 1., 2., 2., -3., -3.]);
        let p = pca_fit(&x, 2).unwrap();
        assert_eq!(p.n_components(), 2);
        let c = p.components.data();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0].abs() - r).abs() < 1e-12 && (c[1].abs() - r).abs() < 1e-12);
        assert!(c[0] * c[1] > 0.0);
        assert!(p.explained_variance[1].abs() < 1e-12);
    }

    #[test]
    fn caps_at_sample_rank() {
        let data: Vec<f64> = (0..5 * 16384).map(|i| ((i * 2654435761usize) % 1000) as f64 / 1000.0).collect();
        let x = mat(5, 16384, data);
        let p = pca_fit(&x, 200).unwrap();
        assert_eq!(p.n_components(), 4);
        assert_eq!(p.components.shape(), &[4, 16384]);
    }

    #[test]
    fn mean_row_maps_to_origin() {
        let x = mat(3, 3, vec![1., 2., 0., 3., 1., 1., 2., 0., 5.]);
        let p = pca_fit(&x, 2).unwrap();
        let mean = mat(1, 3, p.mean.clone());
        let t = pca_transform(&p, &mean).unwrap();
        assert!(t.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn one_component_gives_signed_positions_along_line() {
        // Points on the line through (1,1) with direction (3,4)/5 at
        // parameters -5, 0, 5.
        let x = mat(3, 2, vec![-2., -3., 1., 1., 4., 5.]);
        let p = pca_fit(&x, 1).unwrap();
        let t = pca_transform(&p, &x).unwrap();
        let sign = t.data()[2].signum();
        for (got, want) in t.data().iter().zip([-5.0, 0.0, 5.0]) {
            assert!((got * sign - want).abs() < 1e-12, "{got}");
        }
    }

    #[test]
    fn transform_rejects_wrong_width() {
        let x = mat(3, 2, vec![0., 1., 1., 0., 2., 2.]);
        let p = pca_fit(&x, 1).unwrap();
        assert!(matches!(pca_transform(&p, &mat(1, 3, vec![0.; 3])), Err(Error::Validation(_))));
    }

    #[test]
    fn needs_two_samples() {
        assert!(matches!(pca_fit(&mat(1, 3, vec![0.; 3]), 2), Err(Error::Validation(_))));
    }
}
