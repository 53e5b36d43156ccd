//! Closed-form ridge regression with an unpenalized intercept.
//!
//! Columns and outcome are centered, the weights solve
//! `(XcᵀXc + λI) w = Xcᵀyc` by Cholesky, and the bias is recovered as
//! `ȳ − x̄·w`. When the design is wider than it is tall (and λ > 0) the
//! equivalent dual system `(XcXcᵀ + λI) α = yc`, `w = Xcᵀα` is solved instead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::folds::{assign_folds, split};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Relative pivot floor below which an unpenalized system counts as singular.
const PIVOT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: f64,
}

impl RidgeFit {
    /// Intercept-only model.
    pub fn constant(bias: f64) -> Self {
        RidgeFit {
            weights: Vec::new(),
            bias,
            penalty: 0.0,
        }
    }
}

/// How the ridge penalty is chosen for a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPolicy {
    Fixed(f64),
    /// Nested k-fold selection over the listed penalties on the training rows.
    Grid {
        values: Vec<f64>,
        folds: usize,
    },
}

impl Default for PenaltyPolicy {
    fn default() -> Self {
        PenaltyPolicy::Grid {
            values: default_grid(),
            folds: 5,
        }
    }
}

/// `10^-3, 10^-2, …, 10^5`.
pub fn default_grid() -> Vec<f64> {
    (-3..=5).map(|e| 10f64.powi(e)).collect()
}

pub fn ridge_fit(x: &Matrix, y: &[f64], penalty: f64) -> Result<RidgeFit> {
    check_inputs(x, y)?;
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be finite and non-negative, got {penalty}"
        )));
    }
    let centered = Centered::new(x.as_dmatrix(), y);
    let w = if x.ncols() == 0 {
        DVector::zeros(0)
    } else if penalty > 0.0 && x.ncols() > x.nrows() {
        solve_dual(&centered.x, &centered.y, penalty)?
    } else {
        solve_primal(&centered.x, &centered.y, penalty)?
    };
    Ok(centered.finish(w, penalty))
}

pub fn ridge_predict(fit: &RidgeFit, x: &Matrix) -> Result<Vec<f64>> {
    if x.ncols() != fit.weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} weights, input has {} columns",
            fit.weights.len(),
            x.ncols()
        )));
    }
    let w = DVector::from_column_slice(&fit.weights);
    let pred = x.as_dmatrix() * w;
    Ok(pred.iter().map(|v| v + fit.bias).collect())
}

/// Fits with the penalty chosen by `policy`. `seed` drives the inner fold
/// assignment for grid selection.
pub fn ridge_fit_with_policy(x: &Matrix, y: &[f64], policy: &PenaltyPolicy, seed: u64) -> Result<RidgeFit> {
    match policy {
        PenaltyPolicy::Fixed(p) => ridge_fit(x, y, *p),
        PenaltyPolicy::Grid { values, folds } => {
            let penalty = select_penalty(x, y, values, *folds, seed)?;
            ridge_fit(x, y, penalty)
        }
    }
}

/// Picks the grid penalty with the smallest pooled held-out squared error
/// under k-fold splitting of the rows. Ties go to the larger penalty.
pub fn select_penalty(x: &Matrix, y: &[f64], grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    check_inputs(x, y)?;
    if grid.is_empty() || grid.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidArgument(
            "penalty grid must be non-empty and strictly positive".into(),
        ));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let n = x.nrows();
    let k = folds.min(n / 2).max(2);
    if x.ncols() == 0 || n < 4 {
        return Ok(grid[grid.len() - 1]);
    }
    let assignments = assign_folds(n, k, seed);
    let xm = x.as_dmatrix();
    let mut sse = vec![0.0; grid.len()];

    if x.ncols() > n / 2 {
        // Every inner fold is wide: work from one shared uncentered kernel.
        let kernel = xm * xm.transpose();
        for fold in 0..k {
            let (train, test) = split(&assignments, fold);
            kernel_fold_errors(&kernel, y, &train, &test, &grid, &mut sse);
        }
    } else {
        for fold in 0..k {
            let (train, test) = split(&assignments, fold);
            let xtr = xm.select_rows(&train);
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let c = Centered::new(&xtr, &ytr);
            let gram = c.x.transpose() * &c.x;
            let rhs = c.x.transpose() * &c.y;
            let xte = xm.select_rows(&test);
            for (g, &penalty) in grid.iter().enumerate() {
                let mut a = gram.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += penalty;
                }
                let Some(chol) = a.cholesky() else {
                    sse[g] = f64::INFINITY;
                    continue;
                };
                let w = chol.solve(&rhs);
                let bias = c.y_mean - c.x_mean.dot(&w);
                let pred = &xte * &w;
                sse[g] += test
                    .iter()
                    .zip(pred.iter())
                    .map(|(&i, p)| (y[i] - p - bias).powi(2))
                    .sum::<f64>();
            }
        }
    }

    let mut best = 0;
    for g in 1..grid.len() {
        if sse[g] <= sse[best] {
            best = g;
        }
    }
    if !sse[best].is_finite() {
        return Err(Error::IllConditioned(
            "no penalty on the grid produced a solvable system".into(),
        ));
    }
    Ok(grid[best])
}

fn kernel_fold_errors(
    kernel: &DMatrix<f64>,
    y: &[f64],
    train: &[usize],
    test: &[usize],
    grid: &[f64],
    sse: &mut [f64],
) {
    let m = train.len();
    let ktt = kernel.select_rows(train).select_columns(train);
    let kvt = kernel.select_rows(test).select_columns(train);
    // Double-centering with training means only.
    let row_mean: Vec<f64> = (0..m).map(|j| ktt.column(j).sum() / m as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / m as f64;
    let centered = DMatrix::from_fn(m, m, |i, j| ktt[(i, j)] - row_mean[i] - row_mean[j] + grand);
    let val_mean: Vec<f64> = (0..test.len()).map(|v| kvt.row(v).sum() / m as f64).collect();
    let cross = DMatrix::from_fn(test.len(), m, |v, j| kvt[(v, j)] - val_mean[v] - row_mean[j] + grand);
    let y_mean = train.iter().map(|&i| y[i]).sum::<f64>() / m as f64;
    let yc = DVector::from_iterator(m, train.iter().map(|&i| y[i] - y_mean));
    for (g, &penalty) in grid.iter().enumerate() {
        let mut a = centered.clone();
        for d in 0..m {
            a[(d, d)] += penalty;
        }
        let Some(chol) = a.cholesky() else {
            sse[g] = f64::INFINITY;
            continue;
        };
        let alpha = chol.solve(&yc);
        let pred = &cross * alpha;
        sse[g] += test
            .iter()
            .zip(pred.iter())
            .map(|(&i, p)| (y[i] - y_mean - p).powi(2))
            .sum::<f64>();
    }
}

fn check_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} outcomes",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::InvalidArgument("ridge needs at least two rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("outcome contains non-finite values".into()));
    }
    Ok(())
}

struct Centered {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_mean: DVector<f64>,
    y_mean: f64,
}

impl Centered {
    fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = x.nrows() as f64;
        let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
        let y_mean = y.iter().sum::<f64>() / n;
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_mean[j]);
        }
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
        Centered {
            x: xc,
            y: yc,
            x_mean,
            y_mean,
        }
    }

    fn finish(&self, w: DVector<f64>, penalty: f64) -> RidgeFit {
        let bias = self.y_mean - self.x_mean.dot(&w);
        RidgeFit {
            weights: w.iter().copied().collect(),
            bias,
            penalty,
        }
    }
}

fn solve_primal(xc: &DMatrix<f64>, yc: &DVector<f64>, penalty: f64) -> Result<DVector<f64>> {
    let mut a = xc.transpose() * xc;
    let scale = a.diagonal().max().max(f64::MIN_POSITIVE);
    for d in 0..a.nrows() {
        a[(d, d)] += penalty;
    }
    let rhs = xc.transpose() * yc;
    let chol = a.cholesky().ok_or_else(|| singular(penalty))?;
    if penalty == 0.0 {
        let min_pivot = chol
            .l_dirty()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if min_pivot * min_pivot < PIVOT_FLOOR * scale {
            return Err(singular(penalty));
        }
    }
    Ok(chol.solve(&rhs))
}

fn solve_dual(xc: &DMatrix<f64>, yc: &DVector<f64>, penalty: f64) -> Result<DVector<f64>> {
    let mut k = xc * xc.transpose();
    for d in 0..k.nrows() {
        k[(d, d)] += penalty;
    }
    let chol = k.cholesky().ok_or_else(|| singular(penalty))?;
    let alpha = chol.solve(yc);
    Ok(xc.transpose() * alpha)
}

fn singular(penalty: f64) -> Error {
    if penalty == 0.0 {
        Error::IllConditioned("normal equations are singular with zero penalty (collinear or constant columns)".into())
    } else {
        Error::IllConditioned(format!("Cholesky failed with penalty {penalty}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn exact_linear_fit() {
        let fit = ridge_fit(&m(&[vec![1.], vec![2.], vec![3.]]), &[2., 4., 6.], 0.0).unwrap();
        assert_abs_diff_eq!(fit.weights[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.bias, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_outcome_gives_zero_weights() {
        let x = m(&[vec![1., 5.], vec![2., 3.], vec![4., 4.], vec![0., 1.]]);
        let fit = ridge_fit(&x, &[7.5; 4], 0.0).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
        assert_abs_diff_eq!(fit.bias, 7.5, epsilon = 1e-12);
    }

    #[test]
    fn two_point_penalized_by_hand() {
        // Centered x = [-0.5, 0.5], y = [-0.5, 0.5]: w = 0.5 / (0.5 + 1) = 1/3,
        // bias = 1.5 - 1.5 * 1/3 = 1.
        let fit = ridge_fit(&m(&[vec![1.], vec![2.]]), &[1., 2.], 1.0).unwrap();
        assert_abs_diff_eq!(fit.weights[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.bias, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn predict_examples() {
        let fit = RidgeFit {
            weights: vec![2.0],
            bias: 0.0,
            penalty: 0.0,
        };
        assert_eq!(ridge_predict(&fit, &m(&[vec![5.]])).unwrap(), vec![10.0]);
        let fit = RidgeFit {
            weights: vec![0.0, 0.0],
            bias: 3.0,
            penalty: 0.0,
        };
        let p = ridge_predict(&fit, &m(&[vec![1., 9.], vec![-4., 2.]])).unwrap();
        assert_eq!(p, vec![3.0, 3.0]);
        assert!(ridge_predict(&fit, &m(&[vec![1.]])).is_err());
    }

    #[test]
    fn collinear_unpenalized_is_ill_conditioned() {
        let x = m(&[vec![1., 2.], vec![2., 4.], vec![3., 6.], vec![5., 10.]]);
        let err = ridge_fit(&x, &[1., 2., 3., 4.], 0.0).unwrap_err();
        assert!(matches!(err, Error::IllConditioned(_)), "{err}");
        assert!(ridge_fit(&x, &[1., 2., 3., 4.], 0.1).is_ok());
    }

    #[test]
    fn dimension_errors() {
        assert!(ridge_fit(&m(&[vec![1.], vec![2.]]), &[1.0], 0.0).is_err());
        assert!(ridge_fit(&m(&[vec![1.]]), &[1.0], 0.0).is_err());
        assert!(ridge_fit(&m(&[vec![1.], vec![2.]]), &[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn dual_matches_primal_on_wide_data() {
        let x = m(&[
            vec![1., 0., 2., 3., 1.],
            vec![0., 1., 1., 0., 2.],
            vec![2., 2., 0., 1., 0.],
            vec![1., 3., 1., 1., 1.],
        ]);
        let y = [1.0, 0.5, 2.0, 3.0];
        let centered = Centered::new(x.as_dmatrix(), &y);
        let wp = solve_primal(&centered.x, &centered.y, 0.7).unwrap();
        let wd = solve_dual(&centered.x, &centered.y, 0.7).unwrap();
        assert!((wp - wd).amax() < 1e-12);
    }

    #[test]
    fn grid_selection_prefers_small_penalty_for_clean_signal() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1] + 2.0).collect();
        let p = select_penalty(&m(&rows), &y, &default_grid(), 5, 1).unwrap();
        assert_eq!(p, 1e-3);
        // Pure noise: the strongest penalty wins.
        let noise: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0).collect();
        let wide: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..60).map(|j| (((i * 31 + j * 17) % 23) as f64).sin()).collect())
            .collect();
        let p = select_penalty(&m(&wide), &noise, &default_grid(), 5, 1).unwrap();
        assert!(p >= 1e3, "{p}");
    }

    #[test]
    fn kernel_path_matches_primal_path() {
        // Same data evaluated through both inner-CV routes must pick the same penalty
        // and produce the same fold errors.
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..8).map(|j| (((i * 13 + j * 7) % 19) as f64).cos()).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[3] + 0.1 * r[5]).collect();
        let x = m(&rows);
        let grid = default_grid();
        let assignments = assign_folds(12, 3, 4);
        let xm = x.as_dmatrix();
        let kernel = xm * xm.transpose();
        let mut sse_kernel = vec![0.0; grid.len()];
        let mut sse_primal = vec![0.0; grid.len()];
        for fold in 0..3 {
            let (train, test) = split(&assignments, fold);
            kernel_fold_errors(&kernel, &y, &train, &test, &grid, &mut sse_kernel);
            let xtr = x.select_rows(&train);
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            for (g, &p) in grid.iter().enumerate() {
                let fit = ridge_fit(&xtr, &ytr, p).unwrap();
                let pred = ridge_predict(&fit, &x.select_rows(&test)).unwrap();
                sse_primal[g] += test.iter().zip(&pred).map(|(&i, q)| (y[i] - q).powi(2)).sum::<f64>();
            }
        }
        for (a, b) in sse_kernel.iter().zip(&sse_primal) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn weight_norm_shrinks_with_penalty(
            vals in proptest::collection::vec(-5.0f64..5.0, 24),
            ys in proptest::collection::vec(-5.0f64..5.0, 8),
        ) {
            let x = Matrix::from_row_major(8, 3, vals).unwrap();
            let mut last = f64::INFINITY;
            for p in default_grid() {
                let fit = ridge_fit(&x, &ys, p).unwrap();
                let norm = fit.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                prop_assert!(norm <= last * (1.0 + 1e-9) + 1e-12);
                last = norm;
            }
        }

        #[test]
        fn normal_equations_hold(
            vals in proptest::collection::vec(-3.0f64..3.0, 30),
            ys in proptest::collection::vec(-3.0f64..3.0, 6),
            penalty in 0.01f64..100.0,
        ) {
            let x = Matrix::from_row_major(6, 5, vals).unwrap();
            let fit = ridge_fit(&x, &ys, penalty).unwrap();
            let c = Centered::new(x.as_dmatrix(), &ys);
            let w = DVector::from_column_slice(&fit.weights);
            let lhs = c.x.transpose() * &c.x * &w + &w * penalty;
            let rhs = c.x.transpose() * &c.y;
            let scale = 1.0 + rhs.amax() + (c.x.transpose() * &c.x).amax() * w.amax();
            prop_assert!((lhs - rhs).amax() < 1e-8 * scale);
        }
    }
}
