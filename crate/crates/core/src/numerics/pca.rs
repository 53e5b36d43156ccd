//! Principal components by exact SVD or by a seeded randomized range finder.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_OVERSAMPLING: usize = 10;
pub const DEFAULT_POWER_ITERATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMethod {
    Exact,
    Randomized,
}

/// Centering vector and orthonormal basis (`cols x k`, one component per
/// column) ordered by decreasing explained variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub basis: Matrix,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "PCA fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let centered = center(x.as_dmatrix(), &self.mean);
        Ok(Matrix::from_dmatrix_unchecked(centered * self.basis.as_dmatrix()))
    }
}

pub fn pca_fit(x: &Matrix, k: usize, method: PcaMethod, seed: u64) -> Result<PcaModel> {
    let (n, p) = (x.nrows(), x.ncols());
    if k == 0 || k > n.min(p) {
        return Err(Error::InvalidArgument(format!(
            "PCA needs 1 <= k <= min(rows, cols) = {}, got {k}",
            n.min(p)
        )));
    }
    let mean = x.column_means();
    let xc = center(x.as_dmatrix(), &mean);
    let denom = (n.max(2) - 1) as f64;
    let total_variance = xc.iter().map(|v| v * v).sum::<f64>() / denom;
    if total_variance <= f64::EPSILON * xc.iter().map(|v| v.abs()).fold(1.0, f64::max) {
        return Err(Error::ZeroVariance(
            "PCA input has no variance (all rows identical)".into(),
        ));
    }
    let (basis, singular) = match method {
        PcaMethod::Exact => exact_components(&xc, k),
        PcaMethod::Randomized => randomized_components(&xc, k, DEFAULT_OVERSAMPLING, DEFAULT_POWER_ITERATIONS, seed),
    };
    let basis = fix_signs(basis);
    let explained_variance = singular.iter().map(|s| s * s / denom).collect();
    Ok(PcaModel {
        mean,
        basis: Matrix::from_dmatrix(basis)?,
        explained_variance,
        total_variance,
    })
}

fn center(x: &DMatrix<f64>, mean: &[f64]) -> DMatrix<f64> {
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    xc
}

/// Right singular vectors of the centered data, top `k`.
fn exact_components(xc: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let svd = xc.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    top_k(svd.singular_values.as_slice(), &v_t, k)
}

fn randomized_components(
    xc: &DMatrix<f64>,
    k: usize,
    oversampling: usize,
    power_iterations: usize,
    seed: u64,
) -> (DMatrix<f64>, Vec<f64>) {
    let (n, p) = xc.shape();
    let width = (k + oversampling).min(n).min(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(p, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(xc * omega);
    for _ in 0..power_iterations {
        let z = orthonormalize(xc.transpose() * &q);
        q = orthonormalize(xc * z);
    }
    let b = q.transpose() * xc;
    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    top_k(svd.singular_values.as_slice(), &v_t, k)
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn top_k(singular: &[f64], v_t: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]).then(a.cmp(&b)));
    order.truncate(k);
    let basis = DMatrix::from_fn(v_t.ncols(), k, |i, c| v_t[(order[c], i)]);
    (basis, order.iter().map(|&i| singular[i]).collect())
}

/// Orients each component so its largest-magnitude loading is positive.
fn fix_signs(mut basis: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in basis.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    basis
}
