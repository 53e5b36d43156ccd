//! Factor handling: scaling, interaction construction, selection, and the
//! multiplicative composition of factors with language features.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::numerics::{ridge_fit_with_policy, Matrix, PcaMethod, PenaltyPolicy};
use crate::preprocessing::{
    minmax_fit, pca_transform_fit, select_fit, zscore_fit_apply, FittedTransform, TransformKind,
};

/// The eleven census-style factor names used by the synthetic generator.
pub const CENSUS_FACTORS: [&str; 11] = [
    "median_income",
    "unemployment_rate",
    "pct_bachelors",
    "pct_high_school",
    "median_age",
    "pct_female",
    "pct_black",
    "pct_hispanic",
    "pct_foreign_born",
    "pct_married",
    "population_density",
];

/// Age, race and education.
pub const AGE_RACE_EDUCATION: [&str; 3] = ["median_age", "pct_black", "pct_bachelors"];

/// Row-scales `language` by each factor column in turn and concatenates the
/// blocks: block `j` is `diag(factors[:, j]) · language`.
pub fn adapt(language: &Matrix, factors: &Matrix) -> Result<Matrix> {
    let all: Vec<usize> = (0..language.ncols() * factors.ncols()).collect();
    adapt_columns(language, factors, &all)
}

/// The listed columns of [`adapt`]'s output, in the order given. Column
/// `j * l + c` is factor `j` times language column `c`.
pub fn adapt_columns(language: &Matrix, factors: &Matrix, columns: &[usize]) -> Result<Matrix> {
    if language.nrows() != factors.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "language has {} rows, factors have {}",
            language.nrows(),
            factors.nrows()
        )));
    }
    let (n, l, d) = (language.nrows(), language.ncols(), factors.ncols());
    if let Some(&bad) = columns.iter().find(|&&c| c >= l * d) {
        return Err(Error::InvalidArgument(format!(
            "adapted column {bad} out of range for {d} factors x {l} features"
        )));
    }
    let mut out = vec![0.0; n * columns.len()];
    for (dst, &c) in out.chunks_exact_mut(n.max(1)).zip(columns) {
        let v = factors.column(c / l);
        let src = language.column(c % l);
        for ((o, a), b) in dst.iter_mut().zip(src).zip(v) {
            *o = a * b;
        }
    }
    Matrix::from_dmatrix(DMatrix::from_vec(n, columns.len(), out))
}

/// Column names matching [`adapt`]'s output order.
pub fn adapted_names(language_names: &[String], factor_names: &[String]) -> Vec<String> {
    factor_names
        .iter()
        .flat_map(|f| language_names.iter().map(move |x| format!("{f}|{x}")))
        .collect()
}

fn all_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// Appends the min-max renormalized product of every factor pair `(i, j)`,
/// `i < j`, after the original columns. Scaling is fitted on `factors`.
pub fn interaction_factors(factors: &Matrix, names: &[String]) -> Result<(FittedTransform, Matrix)> {
    if factors.ncols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "interactions need at least two factors, got {}",
            factors.ncols()
        )));
    }
    if names.len() != factors.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} factor columns but {} names",
            factors.ncols(),
            names.len()
        )));
    }
    let pairs = all_pairs(names.len());
    let mut out_names = names.to_vec();
    out_names.extend(pairs.iter().map(|&(a, b)| format!("{}*{}", names[a], names[b])));
    let products = FittedTransform {
        input_names: names.to_vec(),
        output_names: out_names.clone(),
        kind: TransformKind::Interactions { pairs },
    };
    let raw = products.apply(factors)?;
    let scaler = minmax_fit(&raw, &out_names)?;
    let scaled = scaler.apply(&raw)?;
    Ok((FittedTransform::chain(names, vec![products, scaler]), scaled))
}

/// Recursive elimination: refit a ridge of `y` on the z-scored surviving
/// factors and drop the one with the smallest |weight| until `k` remain.
/// Returns surviving column indices in input order.
pub fn select_factors_rfe(
    factors: &Matrix,
    y: &[f64],
    k: usize,
    policy: &PenaltyPolicy,
    seed: u64,
) -> Result<Vec<usize>> {
    let d = factors.ncols();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("RFE needs 1 <= k <= {d}, got {k}")));
    }
    let names: Vec<String> = (0..d).map(|j| j.to_string()).collect();
    let mut alive: Vec<usize> = (0..d).collect();
    while alive.len() > k {
        let sub = factors.select_columns(&alive);
        let sub_names: Vec<String> = alive.iter().map(|&j| names[j].clone()).collect();
        let (_, z, _) = zscore_fit_apply(&sub, &sub_names, &[])?;
        let fit = ridge_fit_with_policy(&z, y, policy, seed)?;
        // Ties drop the later column.
        let mut weakest = 0;
        for (pos, w) in fit.weights.iter().enumerate() {
            if w.abs() <= fit.weights[weakest].abs() {
                weakest = pos;
            }
        }
        alive.remove(weakest);
    }
    Ok(alive)
}

/// `k` principal-component scores of the z-scored factors, each min-max
/// renormalized on the fitting rows.
pub fn select_factors_pca(
    factors: &Matrix,
    names: &[String],
    k: usize,
    seed: u64,
) -> Result<(FittedTransform, Matrix)> {
    let (zscore, z, _) = zscore_fit_apply(factors, names, &[])?;
    let pca = pca_transform_fit(&z, names, k, PcaMethod::Exact, seed, "factor_")?;
    let scores = pca.apply(&z)?;
    let scaler = minmax_fit(&scores, &pca.output_names)?;
    let scaled = scaler.apply(&scores)?;
    Ok((FittedTransform::chain(names, vec![zscore, pca, scaler]), scaled))
}

/// How factors are chosen before adaptation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorPolicy {
    #[default]
    All,
    Manual {
        names: Vec<String>,
    },
    Rfe {
        k: usize,
    },
    Pca {
        k: usize,
    },
}

impl FactorPolicy {
    pub fn age_race_education() -> Self {
        FactorPolicy::Manual {
            names: AGE_RACE_EDUCATION.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Where each selected factor came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Original { name: String },
    Interaction { left: String, right: String },
    PcaComponent { index: usize },
}

/// A factor table together with the origin of every column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSet {
    pub table: FeatureTable,
    pub provenance: Vec<Provenance>,
}

/// Frozen factor preparation: min-max scaling, optional interactions, then
/// selection. PCA scores get their own min-max pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFactors {
    pub transform: FittedTransform,
    pub provenance: Vec<Provenance>,
}

impl FittedFactors {
    pub fn names(&self) -> &[String] {
        &self.transform.output_names
    }

    pub fn width(&self) -> usize {
        self.transform.output_names.len()
    }

    pub fn apply(&self, factors: &FeatureTable) -> Result<Matrix> {
        self.transform.apply_table(factors)
    }

    pub fn factor_set(&self, factors: &FeatureTable) -> Result<FactorSet> {
        let values = self.apply(factors)?;
        Ok(FactorSet {
            table: FeatureTable::new(
                factors.group(),
                factors.instance_ids().to_vec(),
                self.names().to_vec(),
                values,
            )?,
            provenance: self.provenance.clone(),
        })
    }
}

/// Fits the factor preparation on training rows and returns it with the
/// prepared training factors (every column in `[0, 1]`).
pub fn fit_factors(
    train: &FeatureTable,
    y: &[f64],
    policy: &FactorPolicy,
    interactions: bool,
    penalty: &PenaltyPolicy,
    seed: u64,
) -> Result<(FittedFactors, Matrix)> {
    let names = train.feature_names().to_vec();
    let scaler = minmax_fit(train.values(), &names)?;
    let mut cur = scaler.apply(train.values())?;
    let mut steps = vec![scaler];
    let mut provenance: Vec<Provenance> = names.iter().map(|n| Provenance::Original { name: n.clone() }).collect();

    if interactions {
        let (t, scaled) = interaction_factors(&cur, &names)?;
        let TransformKind::Chain { steps: inner } = t.kind else {
            unreachable!("interaction_factors returns a chain")
        };
        for &(a, b) in &all_pairs(names.len()) {
            provenance.push(Provenance::Interaction {
                left: names[a].clone(),
                right: names[b].clone(),
            });
        }
        steps.extend(inner);
        cur = scaled;
    }
    let cur_names = steps.last().map_or(names.clone(), |s| s.output_names.clone());

    match policy {
        FactorPolicy::All => {}
        FactorPolicy::Manual { names: wanted } => {
            let idx = wanted
                .iter()
                .map(|w| {
                    cur_names
                        .iter()
                        .position(|n| n == w)
                        .ok_or_else(|| Error::Config(format!("manual factor {w:?} is not in the factor table")))
                })
                .collect::<Result<Vec<_>>>()?;
            let sel = select_fit(&cur_names, idx.clone())?;
            cur = sel.apply(&cur)?;
            steps.push(sel);
            provenance = idx.iter().map(|&j| provenance[j].clone()).collect();
        }
        FactorPolicy::Rfe { k } => {
            let idx = select_factors_rfe(&cur, y, *k, penalty, seed)?;
            let sel = select_fit(&cur_names, idx.clone())?;
            cur = sel.apply(&cur)?;
            steps.push(sel);
            provenance = idx.iter().map(|&j| provenance[j].clone()).collect();
        }
        FactorPolicy::Pca { k } => {
            let (t, scaled) = select_factors_pca(&cur, &cur_names, *k, seed)?;
            let TransformKind::Chain { steps: inner } = t.kind else {
                unreachable!("select_factors_pca returns a chain")
            };
            steps.extend(inner);
            cur = scaled;
            provenance = (0..*k).map(|index| Provenance::PcaComponent { index }).collect();
        }
    }
    Ok((
        FittedFactors {
            transform: FittedTransform::chain(&names, steps),
            provenance,
        },
        cur,
    ))
}
