//! Dense numerical kernel: matrices, ridge regression, PCA and metrics.

pub mod folds;
pub mod matrix;
pub mod metrics;
pub mod pca;
pub mod ridge;

pub use matrix::Matrix;
pub use metrics::{paired_t_test, pearson_r, r_squared, PairedTTest};
pub use pca::{pca_fit, PcaMethod, PcaModel};
pub use ridge::{ridge_fit, ridge_fit_with_policy, ridge_predict, PenaltyPolicy, RidgeFit};
