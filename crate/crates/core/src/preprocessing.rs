//! Fit-on-train, apply-anywhere feature transforms.
//!
//! Every transform is learned from training rows only and frozen into a
//! [`FittedTransform`], which records the column names it consumes and
//! produces so it can be re-applied (and persisted) independently.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::numerics::{pca_fit, Matrix, PcaMethod, PcaModel};

pub const TRANSFORM_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    #[serde(flatten)]
    pub kind: TransformKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum TransformKind {
    Minmax {
        min: Vec<f64>,
        max: Vec<f64>,
    },
    Zscore {
        mean: Vec<f64>,
        sd: Vec<f64>,
    },
    Kbest {
        indices: Vec<usize>,
        scores: Vec<f64>,
    },
    Pca {
        model: PcaModel,
    },
    Select {
        indices: Vec<usize>,
    },
    /// Originals followed by the elementwise product of each listed pair.
    Interactions {
        pairs: Vec<(usize, usize)>,
    },
    Chain {
        steps: Vec<FittedTransform>,
    },
}

#[derive(Serialize, Deserialize)]
struct TransformDocument {
    version: u32,
    transform: FittedTransform,
}

impl FittedTransform {
    pub fn identity(names: &[String]) -> Self {
        FittedTransform::chain(names, Vec::new())
    }

    pub fn chain(input_names: &[String], steps: Vec<FittedTransform>) -> Self {
        let output_names = steps
            .last()
            .map_or_else(|| input_names.to_vec(), |s| s.output_names.clone());
        FittedTransform {
            input_names: input_names.to_vec(),
            output_names,
            kind: TransformKind::Chain { steps },
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            TransformKind::Minmax { .. } => "minmax",
            TransformKind::Zscore { .. } => "zscore",
            TransformKind::Kbest { .. } => "kbest",
            TransformKind::Pca { .. } => "pca",
            TransformKind::Select { .. } => "select",
            TransformKind::Interactions { .. } => "interactions",
            TransformKind::Chain { .. } => "chain",
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.input_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} transform expects {} columns, got {}",
                self.kind_label(),
                self.input_names.len(),
                x.ncols()
            )));
        }
        match &self.kind {
            TransformKind::Minmax { min, max } => Ok(map_columns(x, |j, v| {
                let range = max[j] - min[j];
                if range > 0.0 {
                    (v - min[j]) / range
                } else {
                    0.5
                }
            })),
            TransformKind::Zscore { mean, sd } => {
                Ok(map_columns(
                    x,
                    |j, v| {
                        if sd[j] > 0.0 {
                            (v - mean[j]) / sd[j]
                        } else {
                            0.0
                        }
                    },
                ))
            }
            TransformKind::Kbest { indices, .. } | TransformKind::Select { indices } => Ok(x.select_columns(indices)),
            TransformKind::Pca { model } => model.transform(x),
            TransformKind::Interactions { pairs } => {
                let n = x.nrows();
                let mut cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j).to_vec()).collect();
                for &(a, b) in pairs {
                    cols.push(x.column(a).iter().zip(x.column(b)).map(|(u, v)| u * v).collect());
                }
                Matrix::from_columns(n, &cols)
            }
            TransformKind::Chain { steps } => {
                let mut cur = x.clone();
                for s in steps {
                    cur = s.apply(&cur)?;
                }
                Ok(cur)
            }
        }
    }

    /// When the transform starts by keeping a subset of its input columns,
    /// returns those column indices and the steps that follow.
    pub fn leading_selection(&self) -> Option<(&[usize], &[FittedTransform])> {
        match &self.kind {
            TransformKind::Kbest { indices, .. } | TransformKind::Select { indices } => Some((indices, &[])),
            TransformKind::Chain { steps } => match steps.first().map(|s| &s.kind) {
                Some(TransformKind::Kbest { indices, .. } | TransformKind::Select { indices }) => {
                    Some((indices, &steps[1..]))
                }
                _ => None,
            },
            _ => None,
        }
    }

    /// Applies to a table, matching its columns to `input_names` by name.
    pub fn apply_table(&self, table: &FeatureTable) -> Result<Matrix> {
        if table.feature_names() == self.input_names.as_slice() {
            return self.apply(table.values());
        }
        let reordered = table.select_named(&self.input_names).map_err(|_| {
            let missing: Vec<&String> = self
                .input_names
                .iter()
                .filter(|n| !table.feature_names().contains(n))
                .take(5)
                .collect();
            Error::Data(format!(
                "{} table is missing features the transform was fitted on: {missing:?}",
                table.group()
            ))
        })?;
        self.apply(reordered.values())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TransformDocument {
            version: TRANSFORM_SCHEMA_VERSION,
            transform: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TransformDocument = serde_json::from_str(s)?;
        if doc.version != TRANSFORM_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported transform schema version {}",
                doc.version
            )));
        }
        Ok(doc.transform)
    }
}

fn map_columns(x: &Matrix, f: impl Fn(usize, f64) -> f64) -> Matrix {
    let mut m = x.as_dmatrix().clone();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        for v in col.iter_mut() {
            *v = f(j, *v);
        }
    }
    Matrix::from_dmatrix_unchecked(m)
}

fn check_names(x: &Matrix, names: &[String]) -> Result<()> {
    if x.ncols() != names.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} columns but {} names",
            x.ncols(),
            names.len()
        )));
    }
    Ok(())
}

/// Per-column min-max scaling to `[0, 1]` on the training rows. Constant
/// columns map to 0.5.
pub fn minmax_fit(train: &Matrix, names: &[String]) -> Result<FittedTransform> {
    check_names(train, names)?;
    let (mut min, mut max) = (Vec::new(), Vec::new());
    for j in 0..train.ncols() {
        let col = train.column(j);
        min.push(col.iter().copied().fold(f64::INFINITY, f64::min));
        max.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(FittedTransform {
        input_names: names.to_vec(),
        output_names: names.to_vec(),
        kind: TransformKind::Minmax { min, max },
    })
}

/// Per-column standardization (population standard deviation). Constant
/// columns map to 0.
pub fn zscore_fit(train: &Matrix, names: &[String]) -> Result<FittedTransform> {
    check_names(train, names)?;
    let n = train.nrows() as f64;
    let (mut mean, mut sd) = (Vec::new(), Vec::new());
    for j in 0..train.ncols() {
        let col = train.column(j);
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        mean.push(m);
        // Round-off can leave a tiny variance on a constant column.
        let floor = 64.0 * f64::EPSILON * m.abs();
        sd.push(if var > floor * floor { var.sqrt() } else { 0.0 });
    }
    Ok(FittedTransform {
        input_names: names.to_vec(),
        output_names: names.to_vec(),
        kind: TransformKind::Zscore { mean, sd },
    })
}

/// Fits on `train` and applies to it and to every matrix in `others`.
pub fn minmax_fit_apply(
    train: &Matrix,
    names: &[String],
    others: &[&Matrix],
) -> Result<(FittedTransform, Matrix, Vec<Matrix>)> {
    fit_apply(minmax_fit(train, names)?, train, others)
}

pub fn zscore_fit_apply(
    train: &Matrix,
    names: &[String],
    others: &[&Matrix],
) -> Result<(FittedTransform, Matrix, Vec<Matrix>)> {
    fit_apply(zscore_fit(train, names)?, train, others)
}

fn fit_apply(t: FittedTransform, train: &Matrix, others: &[&Matrix]) -> Result<(FittedTransform, Matrix, Vec<Matrix>)> {
    let tr = t.apply(train)?;
    let rest = others.iter().map(|m| t.apply(m)).collect::<Result<Vec<_>>>()?;
    Ok((t, tr, rest))
}

/// |Pearson r| of every column with `y`; constant columns score 0.
pub fn correlation_scores(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} outcomes",
            x.nrows(),
            y.len()
        )));
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let syy: f64 = yc.iter().map(|v| v * v).sum();
    Ok((0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let mx = col.iter().sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (v, w) in col.iter().zip(&yc) {
                let d = v - mx;
                sxy += d * w;
                sxx += d * d;
            }
            if sxx <= 0.0 || syy <= 0.0 {
                0.0
            } else {
                (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
            }
        })
        .collect())
}

/// Keeps the `k` columns most correlated (in absolute value) with `y`. Ties
/// go to the lexicographically smaller name; survivors keep their input
/// order.
pub fn kbest_fit(train: &Matrix, y: &[f64], k: usize, names: &[String]) -> Result<FittedTransform> {
    check_names(train, names)?;
    if k == 0 || k > train.ncols() {
        return Err(Error::InvalidArgument(format!(
            "k-best needs 1 <= k <= {}, got {k}",
            train.ncols()
        )));
    }
    let scores = correlation_scores(train, y)?;
    let mut order: Vec<usize> = (0..train.ncols()).collect();
    order.sort_by(|&a, &b| match scores[b].partial_cmp(&scores[a]) {
        Some(Ordering::Equal) | None => names[a].cmp(&names[b]),
        Some(o) => o,
    });
    let mut indices: Vec<usize> = order[..k].to_vec();
    indices.sort_unstable();
    Ok(FittedTransform {
        input_names: names.to_vec(),
        output_names: indices.iter().map(|&j| names[j].clone()).collect(),
        kind: TransformKind::Kbest {
            scores: indices.iter().map(|&j| scores[j]).collect(),
            indices,
        },
    })
}

/// PCA projection; output columns are named `{prefix}pc{i}`.
pub fn pca_transform_fit(
    train: &Matrix,
    names: &[String],
    n_components: usize,
    method: PcaMethod,
    seed: u64,
    prefix: &str,
) -> Result<FittedTransform> {
    check_names(train, names)?;
    let model = pca_fit(train, n_components, method, seed)?;
    Ok(FittedTransform {
        input_names: names.to_vec(),
        output_names: (0..n_components).map(|i| format!("{prefix}pc{i}")).collect(),
        kind: TransformKind::Pca { model },
    })
}

pub fn select_fit(names: &[String], indices: Vec<usize>) -> Result<FittedTransform> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= names.len()) {
        return Err(Error::InvalidArgument(format!("column {bad} out of range")));
    }
    Ok(FittedTransform {
        input_names: names.to_vec(),
        output_names: indices.iter().map(|&j| names[j].clone()).collect(),
        kind: TransformKind::Select { indices },
    })
}

/// k-best selection followed by randomized PCA. Returns the frozen chain and
/// the reduced training matrix.
pub fn reduce_group(
    train: &Matrix,
    y: &[f64],
    names: &[String],
    k_best: usize,
    n_components: usize,
    seed: u64,
    prefix: &str,
) -> Result<(FittedTransform, Matrix)> {
    if n_components == 0 || n_components > k_best || k_best > train.ncols() {
        return Err(Error::InvalidArgument(format!(
            "reduce_group needs 1 <= n_components ({n_components}) <= k_best ({k_best}) <= columns ({})",
            train.ncols()
        )));
    }
    let kbest = kbest_fit(train, y, k_best, names)?;
    let selected = kbest.apply(train)?;
    let pca = pca_transform_fit(
        &selected,
        &kbest.output_names,
        n_components,
        PcaMethod::Randomized,
        seed,
        prefix,
    )?;
    let reduced = pca.apply(&selected)?;
    Ok((FittedTransform::chain(names, vec![kbest, pca]), reduced))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_columns(v.len(), &[v.to_vec()]).unwrap()
    }

    #[test]
    fn minmax_examples() {
        let (t, tr, rest) = minmax_fit_apply(&col(&[2., 4., 6.]), &names(1), &[&col(&[8.])]).unwrap();
        assert_eq!(tr.column(0), &[0.0, 0.5, 1.0]);
        assert_eq!(rest[0].column(0), &[1.5]);
        assert_eq!(t.kind_label(), "minmax");
        let (_, flat, _) = minmax_fit_apply(&col(&[3., 3.]), &names(1), &[]).unwrap();
        assert_eq!(flat.column(0), &[0.5, 0.5]);
    }

    #[test]
    fn zscore_examples() {
        let (_, z, _) = zscore_fit_apply(&col(&[1., 2., 3.]), &names(1), &[]).unwrap();
        let c = z.column(0);
        let m = c.iter().sum::<f64>() / 3.0;
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sd, 1.0, epsilon = 1e-15);
        let (_, flat, _) = zscore_fit_apply(&col(&[0.1, 0.1, 0.1]), &names(1), &[]).unwrap();
        assert_eq!(flat.column(0), &[0.0, 0.0, 0.0]);
        // mean 2, population sd 2
        let (_, _, held) = zscore_fit_apply(&col(&[0., 4.]), &names(1), &[&col(&[10.])]).unwrap();
        assert_abs_diff_eq!(held[0].get(0, 0), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn kbest_examples() {
        let y = [1.0, 2.0, 4.0, 3.0, 5.0];
        let x = Matrix::from_columns(
            5,
            &[vec![5.0, 1.0, 2.0, 2.0, 1.0], y.to_vec(), vec![1.0, 1.0, 1.0, 1.0, 1.0]],
        )
        .unwrap();
        let all = kbest_fit(&x, &y, 3, &names(3)).unwrap();
        assert_eq!(all.output_names, names(3));
        let one = kbest_fit(&x, &y, 1, &names(3)).unwrap();
        assert_eq!(one.output_names, vec!["f1"]);
        assert!(kbest_fit(&x, &y, 0, &names(3)).is_err());
        assert!(kbest_fit(&x, &y, 4, &names(3)).is_err());
    }

    #[test]
    fn kbest_ties_break_by_name() {
        let y = [1.0, 2.0, 3.0];
        let x = Matrix::from_columns(3, &[y.to_vec(), y.to_vec(), y.to_vec()]).unwrap();
        let n = vec!["c".to_string(), "a".to_string(), "b".to_string()];
        let t = kbest_fit(&x, &y, 2, &n).unwrap();
        assert_eq!(t.output_names, vec!["a", "b"]);
    }

    #[test]
    fn kbest_hand_ranking() {
        // |r| with y computed directly: f0 = 1, f1 = 0.8, f2 = 1/sqrt(5), f3 = 0, f4 = 0.4.
        let y = [1.0, 2.0, 3.0, 4.0];
        let x = Matrix::from_columns(
            4,
            &[
                vec![2.0, 4.0, 6.0, 8.0],
                vec![1.0, 3.0, 2.0, 4.0],
                vec![1.0, 2.0, 1.0, 2.0],
                vec![1.0, -1.0, -1.0, 1.0],
                vec![4.0, 1.0, 3.0, 2.0],
            ],
        )
        .unwrap();
        let scores = correlation_scores(&x, &y).unwrap();
        let expect = [1.0, 0.8, 1.0 / 5f64.sqrt(), 0.0, 0.4];
        for (s, e) in scores.iter().zip(expect) {
            assert_abs_diff_eq!(*s, e, epsilon = 1e-12);
        }
        let t = kbest_fit(&x, &y, 2, &names(5)).unwrap();
        assert_eq!(t.output_names, vec!["f0", "f1"]);
    }

    #[test]
    fn reduce_group_rank_three_reconstructs() {
        let n = 40;
        let latent: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let t = i as f64;
                [(0.3 * t).sin(), (0.7 * t).cos(), ((i * 7 % 11) as f64) / 11.0]
            })
            .collect();
        let loadings: Vec<[f64; 3]> = (0..12)
            .map(|j| [((j + 1) as f64).sin(), ((j * 3) as f64).cos(), (j % 4) as f64 - 1.5])
            .collect();
        let rows: Vec<Vec<f64>> = latent
            .iter()
            .map(|z| {
                loadings
                    .iter()
                    .map(|l| l[0] * z[0] + l[1] * z[1] + l[2] * z[2] + 2.0)
                    .collect()
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = latent.iter().map(|z| z[0] - z[2]).collect();
        let (chain, reduced) = reduce_group(&x, &y, &names(12), 12, 3, 5, "g:").unwrap();
        assert_eq!(reduced.ncols(), 3);
        let TransformKind::Chain { steps } = &chain.kind else {
            panic!()
        };
        let TransformKind::Pca { model } = &steps[1].kind else {
            panic!()
        };
        let recon = reduced.matmul(&model.basis.transpose()).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..12 {
                err = err.max((recon.get(i, j) + model.mean[j] - x.get(i, j)).abs());
            }
        }
        assert!(err < 1e-9, "{err}");
        assert!(reduce_group(&x, &y, &names(12), 2, 3, 5, "g:").is_err());
    }

    #[test]
    fn chain_json_round_trip() {
        let x = Matrix::from_rows(&[vec![1., 5., 2.], vec![2., 3., 0.], vec![4., 1., 1.], vec![0., 0., 3.]]).unwrap();
        let y = [1.0, 2.0, 3.0, 0.5];
        let (chain, _) = reduce_group(&x, &y, &names(3), 3, 2, 1, "t:").unwrap();
        let back = FittedTransform::from_json(&chain.to_json().unwrap()).unwrap();
        assert_eq!(back, chain);
        assert_eq!(back.apply(&x).unwrap(), chain.apply(&x).unwrap());
        assert!(FittedTransform::from_json(r#"{"version":9,"transform":{}}"#).is_err());
    }

    #[test]
    fn fit_ignores_held_out_rows() {
        let train = Matrix::from_rows(&[vec![1., 2.], vec![3., 5.], vec![2., 2.]]).unwrap();
        let a = zscore_fit(&train, &names(2)).unwrap();
        let (b, _, _) = zscore_fit_apply(&train, &names(2), &[&col(&[1e6, 3.0]).transpose()]).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn kbest_scale_invariant(
            vals in proptest::collection::vec(-5.0f64..5.0, 40),
            scales in proptest::collection::vec(0.01f64..100.0, 5),
            k in 1usize..5,
        ) {
            let x = Matrix::from_row_major(8, 5, vals).unwrap();
            let y: Vec<f64> = (0..8).map(|i| x.get(i, 0) - 0.5 * x.get(i, 3) + (i as f64).sin()).collect();
            let scaled = map_columns(&x, |j, v| v * scales[j]);
            let a = kbest_fit(&x, &y, k, &names(5)).unwrap();
            let b = kbest_fit(&scaled, &y, k, &names(5)).unwrap();
            // Only compare when no near-tie sits at the cut.
            let s = correlation_scores(&x, &y).unwrap();
            let mut sorted = s.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if k == 5 || (sorted[k - 1] - sorted[k]).abs() > 1e-9 {
                prop_assert_eq!(a.output_names, b.output_names);
            }
        }

        #[test]
        fn chain_equals_stepwise(vals in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let x = Matrix::from_row_major(9, 4, vals).unwrap();
            let y: Vec<f64> = (0..9).map(|i| x.get(i, 1) + (i as f64).cos()).collect();
            if let Ok((chain, reduced)) = reduce_group(&x, &y, &names(4), 3, 2, 3, "p:") {
                let TransformKind::Chain { steps } = &chain.kind else { unreachable!() };
                let stepwise = steps[1].apply(&steps[0].apply(&x).unwrap()).unwrap();
                prop_assert_eq!(&stepwise, &reduced);
                prop_assert_eq!(chain.apply(&x).unwrap(), stepwise);
            }
        }
    }
}
