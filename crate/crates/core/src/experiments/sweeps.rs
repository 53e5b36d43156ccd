use serde::{Deserialize, Serialize};

use super::{run_cv, CurvePoint, ExperimentReport, FoldPlan, ModelSpec};
use crate::adaptation::FactorPolicy;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pipelines::{Family, FsStrategy, GroupReduction, PipelineConfig, SelectionScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMethod {
    Rfe,
    Pca,
}

impl FactorMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorMethod::Rfe => "rfe",
            FactorMethod::Pca => "pca",
        }
    }
}

fn curves(report: &ExperimentReport, sweep: &str, specs: &[(String, ModelSpec)]) -> Vec<CurvePoint> {
    specs
        .iter()
        .zip(&report.models)
        .map(|((x, spec), m)| CurvePoint {
            sweep: sweep.to_string(),
            x: x.clone(),
            family: spec.family,
            model: m.name.clone(),
            r2: m.r2,
            mean_fold_r2: m.mean_fold_r2,
        })
        .collect()
}

fn run_labeled(
    data: &Dataset,
    labeled: Vec<(String, ModelSpec)>,
    sweep: &str,
    plan: &FoldPlan,
    jobs: usize,
) -> Result<ExperimentReport> {
    let specs: Vec<ModelSpec> = labeled.iter().map(|(_, s)| s.clone()).collect();
    let mut report = run_cv(data, &specs, plan, jobs)?;
    report.curves = curves(&report, sweep, &labeled);
    Ok(report)
}

/// One CV run per n-gram `k` (the adapted n-gram group follows the same `k`).
pub fn sweep_kbest(
    data: &Dataset,
    ks: &[usize],
    families: &[Family],
    base: &PipelineConfig,
    plan: &FoldPlan,
    jobs: usize,
) -> Result<ExperimentReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument("k-best sweep needs positive k values".into()));
    }
    let mut labeled = Vec::new();
    for &k in ks {
        for &family in families {
            let mut cfg = base.clone();
            cfg.ngrams = GroupReduction {
                k_best: k,
                n_components: base.ngrams.n_components.min(k),
            };
            if let Some(a) = cfg.adapted_ngrams.as_mut() {
                a.k_best = k;
                a.n_components = a.n_components.min(k);
            }
            labeled.push((k.to_string(), ModelSpec::named(format!("{family}@k={k}"), family, cfg)));
        }
    }
    run_labeled(data, labeled, "kbest", plan, jobs)
}

/// One CV run per factor count. Selected factors feed both the control and
/// the adaptation side, so every family sees the same factors.
#[allow(clippy::too_many_arguments)]
pub fn sweep_factors(
    data: &Dataset,
    method: FactorMethod,
    counts: &[usize],
    families: &[Family],
    use_interactions: bool,
    base: &PipelineConfig,
    plan: &FoldPlan,
    jobs: usize,
) -> Result<ExperimentReport> {
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::InvalidArgument("factor sweep needs positive counts".into()));
    }
    let sweep = format!(
        "factors-{}{}",
        method.as_str(),
        if use_interactions { "-interactions" } else { "" }
    );
    let mut labeled = Vec::new();
    for &k in counts {
        for &family in families {
            let cfg = PipelineConfig {
                factors: match method {
                    FactorMethod::Rfe => FactorPolicy::Rfe { k },
                    FactorMethod::Pca => FactorPolicy::Pca { k },
                },
                interactions: use_interactions,
                selection_scope: SelectionScope::All,
                ..base.clone()
            };
            labeled.push((k.to_string(), ModelSpec::named(format!("{family}@{k}"), family, cfg)));
        }
    }
    run_labeled(data, labeled, &sweep, plan, jobs)
}

/// One CV run per feature-selection strategy.
pub fn compare_fs_strategies(
    data: &Dataset,
    families: &[Family],
    strategies: &[FsStrategy],
    base: &PipelineConfig,
    plan: &FoldPlan,
    jobs: usize,
) -> Result<ExperimentReport> {
    let mut labeled = Vec::new();
    for &s in strategies {
        for &family in families {
            let cfg = PipelineConfig {
                fs_strategy: s,
                ..base.clone()
            };
            labeled.push((s.to_string(), ModelSpec::named(format!("{family}@{s}"), family, cfg)));
        }
    }
    run_labeled(data, labeled, "fs", plan, jobs)
}
