//! Cross-validation harness, significance tests, sweeps and the synthetic
//! benchmark generator.

mod report;
mod sweeps;
mod synthetic;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{render_curves_csv, render_table, CurvePoint};
pub use sweeps::{compare_fs_strategies, sweep_factors, sweep_kbest, FactorMethod};
pub use synthetic::{bench_default, bench_pipeline, generate_synthetic, SyntheticSpec, SyntheticTruth, BENCH_SEEDS};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::folds::{assign_folds, split};
use crate::numerics::{paired_t_test, pearson_r, r_squared};
use crate::pipelines::{fit, predict, Family, FittedModel, FsStrategy, PipelineConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Assignment of every instance id to one of `n_folds` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Seeded shuffle of `ids`, then round-robin dealing.
    pub fn new(ids: &[String], n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "cross-validation needs at least 2 folds, got {n_folds}"
            )));
        }
        if ids.len() < 2 * n_folds {
            return Err(Error::InvalidArgument(format!(
                "{} instances cannot fill {n_folds} folds with at least 2 each",
                ids.len()
            )));
        }
        let folds = assign_folds(ids.len(), n_folds, seed);
        Ok(FoldPlan {
            n_folds,
            seed,
            assignments: ids.iter().cloned().zip(folds).collect(),
        })
    }

    /// Fold of each id, in the order given.
    pub fn folds_for(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.assignments
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("instance {id:?} has no fold")))
            })
            .collect()
    }

    /// Row indices of `data` for training and testing on `fold`.
    pub fn split(&self, data: &Dataset, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let folds = self.folds_for(data.instance_ids())?;
        let (train, test) = split(&folds, fold);
        if test.len() < 2 || train.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "fold {fold} has {} test and {} training instances; need at least 2 of each",
                test.len(),
                train.len()
            )));
        }
        Ok((train, test))
    }
}

/// Anything the harness can fit on training rows and evaluate on test rows.
pub trait CvModel: Sync {
    fn name(&self) -> String;

    fn family(&self) -> Option<Family> {
        None
    }

    fn fs_strategy(&self) -> Option<FsStrategy> {
        None
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<f64>>;
}

/// A named pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub family: Family,
    pub config: PipelineConfig,
}

impl ModelSpec {
    pub fn new(family: Family, config: PipelineConfig) -> Self {
        ModelSpec {
            name: family.as_str().to_string(),
            family,
            config,
        }
    }

    pub fn named(name: impl Into<String>, family: Family, config: PipelineConfig) -> Self {
        ModelSpec {
            name: name.into(),
            family,
            config,
        }
    }

    /// One spec per family, sharing `config`.
    pub fn families(families: &[Family], config: &PipelineConfig) -> Vec<ModelSpec> {
        families.iter().map(|&f| ModelSpec::new(f, config.clone())).collect()
    }
}

impl CvModel for ModelSpec {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn family(&self) -> Option<Family> {
        Some(self.family)
    }

    fn fs_strategy(&self) -> Option<FsStrategy> {
        Some(self.config.fs_strategy)
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<f64>> {
        predict(&fit(self.family, train, &self.config)?, test)
    }
}

/// Fits `spec` on every row outside `fold`.
pub fn fit_fold(data: &Dataset, plan: &FoldPlan, fold: usize, spec: &ModelSpec) -> Result<FittedModel> {
    let (train, _) = plan.split(data, fold)?;
    fit(spec.family, &data.subset(&train), &spec.config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    /// `None` when the fold's outcome or predictions are constant.
    pub r2: Option<f64>,
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    pub family: Option<Family>,
    pub fs_strategy: Option<FsStrategy>,
    pub folds: Vec<FoldMetrics>,
    /// Metrics over the pooled out-of-fold predictions.
    pub r2: f64,
    pub pearson_r: Option<f64>,
    pub mean_fold_r2: Option<f64>,
    /// Out-of-fold prediction for every instance, in dataset order.
    pub predictions: Vec<f64>,
}

impl ModelResult {
    pub fn abs_errors(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.predictions).map(|(a, b)| (a - b).abs()).collect()
    }
}

/// Paired t-test on per-instance absolute errors of two models. Negative `t`
/// means `a` has the smaller errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub mean_abs_error_a: f64,
    pub mean_abs_error_b: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// Excluded from determinism comparisons.
    pub timestamp_unix: u64,
    pub seed: u64,
    pub n_folds: usize,
    pub outcome: String,
    pub instance_ids: Vec<String>,
    pub outcome_values: Vec<f64>,
    pub folds: Vec<usize>,
    pub models: Vec<ModelResult>,
    pub comparisons: Vec<Comparison>,
    pub curves: Vec<CurvePoint>,
    pub config: Option<serde_json::Value>,
}

impl ExperimentReport {
    pub fn model(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(s)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }
}

/// Paired t-test between two error vectors; `None` fields when the test is
/// undefined.
pub fn compare_errors(a_name: &str, a: &[f64], b_name: &str, b: &[f64]) -> Comparison {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let test = paired_t_test(a, b).ok();
    Comparison {
        a: a_name.to_string(),
        b: b_name.to_string(),
        mean_abs_error_a: mean(a),
        mean_abs_error_b: mean(b),
        t: test.map(|t| t.t),
        p: test.map(|t| t.p),
    }
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))
}

/// K-fold cross-validation of every model on `data` under `plan`, using up
/// to `jobs` worker threads.
pub fn run_cv<M: CvModel>(data: &Dataset, models: &[M], plan: &FoldPlan, jobs: usize) -> Result<ExperimentReport> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to evaluate".into()));
    }
    let folds = plan.folds_for(data.instance_ids())?;
    let splits = (0..plan.n_folds)
        .map(|f| plan.split(data, f))
        .collect::<Result<Vec<_>>>()?;
    let subsets: Vec<(Dataset, Dataset)> = splits
        .iter()
        .map(|(tr, te)| (data.subset(tr), data.subset(te)))
        .collect();

    let cells: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..plan.n_folds).map(move |f| (m, f)))
        .collect();
    let run = || -> Result<Vec<Vec<f64>>> {
        cells
            .par_iter()
            .map(|&(m, f)| {
                log::debug!("fitting {} on fold {f}", models[m].name());
                models[m].fit_predict(&subsets[f].0, &subsets[f].1)
            })
            .collect()
    };
    let outputs = if jobs <= 1 {
        cells
            .iter()
            .map(|&(m, f)| models[m].fit_predict(&subsets[f].0, &subsets[f].1))
            .collect::<Result<Vec<_>>>()?
    } else {
        build_pool(jobs)?.install(run)?
    };

    let y = data.outcome().values();
    let mut results = Vec::with_capacity(models.len());
    for (m, model) in models.iter().enumerate() {
        let mut pooled = vec![f64::NAN; y.len()];
        let mut fold_metrics = Vec::with_capacity(plan.n_folds);
        for f in 0..plan.n_folds {
            let preds = &outputs[m * plan.n_folds + f];
            let test = &splits[f].1;
            if preds.len() != test.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} returned {} predictions for {} test rows",
                    model.name(),
                    preds.len(),
                    test.len()
                )));
            }
            let truth: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            for (&i, &p) in test.iter().zip(preds) {
                pooled[i] = p;
            }
            fold_metrics.push(FoldMetrics {
                fold: f,
                n_test: test.len(),
                r2: r_squared(&truth, preds).ok(),
                pearson_r: pearson_r(&truth, preds).ok(),
            });
        }
        let fold_r2: Vec<f64> = fold_metrics.iter().filter_map(|m| m.r2).collect();
        results.push(ModelResult {
            name: model.name(),
            family: model.family(),
            fs_strategy: model.fs_strategy(),
            r2: r_squared(y, &pooled)?,
            pearson_r: pearson_r(y, &pooled).ok(),
            mean_fold_r2: (!fold_r2.is_empty()).then(|| fold_r2.iter().sum::<f64>() / fold_r2.len() as f64),
            folds: fold_metrics,
            predictions: pooled,
        });
    }

    let mut comparisons = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            comparisons.push(compare_errors(
                &results[i].name,
                &results[i].abs_errors(y),
                &results[j].name,
                &results[j].abs_errors(y),
            ));
        }
    }

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        timestamp_unix: 0,
        seed: plan.seed,
        n_folds: plan.n_folds,
        outcome: data.outcome().name().to_string(),
        instance_ids: data.instance_ids().to_vec(),
        outcome_values: y.to_vec(),
        folds,
        models: results,
        comparisons,
        curves: Vec::new(),
        config: None,
    })
}
