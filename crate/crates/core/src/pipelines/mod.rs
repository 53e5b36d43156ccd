//! The six model families as fit/predict pipelines.
//!
//! Every family fits one or two stages. A stage builds its design matrix from
//! frozen feature transforms, standardizes it, and fits a ridge model.
//! Residualized families fit the second stage to the in-sample residuals of
//! the first and predict with the sum of both stages.

mod config;
mod features;

use serde::{Deserialize, Serialize};

pub use config::{Family, FsStrategy, GroupReduction, PipelineConfig, SelectionScope};
pub use features::{
    apply_fs_strategy, AdaptSource, AdaptedChain, ControlsInput, ControlsSource, FactorInputs, FittedFeatures,
    LanguageChain,
};

use crate::adaptation::{fit_factors, FittedFactors};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{ridge_fit_with_policy, ridge_predict, Matrix, RidgeFit};
use crate::preprocessing::{zscore_fit, FittedTransform};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

const FACTOR_TAG: u64 = 100;
const RIDGE_TAG: u64 = 200;

/// Mixes a base seed with a purpose tag (splitmix64 finalizer).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFit {
    pub features: FittedFeatures,
    /// Z-scores the assembled design matrix.
    pub scaler: FittedTransform,
    pub ridge: RidgeFit,
}

impl StageFit {
    pub fn predict(&self, data: &Dataset, prepared: Option<&Matrix>) -> Result<Vec<f64>> {
        let x = self.features.assemble(data, prepared)?;
        ridge_predict(&self.ridge, &self.scaler.apply(&x)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: Family,
    pub fs_strategy: FsStrategy,
    pub factors: Option<FittedFactors>,
    pub stages: Vec<StageFit>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    model: FittedModel,
}

impl FittedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDocument {
            version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.version != MODEL_SCHEMA_VERSION {
            return Err(Error::Data(format!("unsupported model schema version {}", doc.version)));
        }
        let m = doc.model;
        let expected = if m.family.is_residualized() { 2 } else { 1 };
        if m.stages.len() != expected {
            return Err(Error::Data(format!(
                "{} model must have {expected} stage(s), found {}",
                m.family,
                m.stages.len()
            )));
        }
        Ok(m)
    }

    fn prepared(&self, data: &Dataset) -> Result<Option<Matrix>> {
        self.factors.as_ref().map(|f| f.apply(data.factors())).transpose()
    }

    /// Predictions of each stage separately.
    pub fn predict_stages(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        let prepared = self.prepared(data)?;
        self.stages.iter().map(|s| s.predict(data, prepared.as_ref())).collect()
    }
}

/// Sum of stage predictions.
pub fn predict(model: &FittedModel, data: &Dataset) -> Result<Vec<f64>> {
    let stages = model.predict_stages(data)?;
    let mut out = vec![0.0; data.n_instances()];
    for s in &stages {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    Ok(out)
}

struct StagePlan {
    controls: bool,
    language: bool,
    adapt: bool,
    residual: bool,
}

struct Prepared {
    fitted: Option<FittedFactors>,
    matrix: Option<Matrix>,
}

impl Prepared {
    fn inputs(&self) -> FactorInputs<'_> {
        FactorInputs {
            prepared: self.matrix.as_ref(),
            prepared_names: self.fitted.as_ref().map_or(&[], |f| f.names()),
        }
    }
}

fn fit_stage(
    data: &Dataset,
    target: &[f64],
    plan: &StagePlan,
    prepared: &Prepared,
    cfg: &PipelineConfig,
    index: u64,
) -> Result<StageFit> {
    let mut features = if plan.language {
        let inputs = prepared.inputs();
        let adapt_with = plan.adapt.then_some(&inputs);
        features::fit_language_features(cfg.fs_strategy, data, target, adapt_with, cfg)?
    } else {
        FittedFeatures {
            strategy: cfg.fs_strategy,
            controls: None,
            language: Vec::new(),
            adapted: Vec::new(),
            combined: None,
        }
    };
    if plan.controls {
        features.controls = Some(match (&prepared.fitted, cfg.selection_scope) {
            (Some(f), SelectionScope::All) => ControlsInput {
                source: ControlsSource::Prepared,
                names: f.names().to_vec(),
            },
            _ => ControlsInput {
                source: ControlsSource::Raw,
                names: data.factors().feature_names().to_vec(),
            },
        });
    }
    let x = features.assemble(data, prepared.matrix.as_ref())?;
    let scaler = zscore_fit(&x, &features.output_names())?;
    let xs = scaler.apply(&x)?;
    let ridge = if plan.residual && xs.ncols() == 0 {
        // Nothing to learn the residual from.
        RidgeFit::constant(0.0)
    } else {
        ridge_fit_with_policy(&xs, target, &cfg.penalty, derive_seed(cfg.seed, RIDGE_TAG + index))?
    };
    Ok(StageFit {
        features,
        scaler,
        ridge,
    })
}

/// Fits `family` on every row of `data`.
pub fn fit(family: Family, data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let y = data.outcome().values();
    let needs_factors = family.adapts() || (family.uses_controls() && cfg.selection_scope == SelectionScope::All);
    let prepared = if needs_factors {
        let (f, m) = fit_factors(
            data.factors(),
            y,
            &cfg.factors,
            cfg.interactions,
            &cfg.penalty,
            derive_seed(cfg.seed, FACTOR_TAG),
        )?;
        Prepared {
            fitted: Some(f),
            matrix: Some(m),
        }
    } else {
        Prepared {
            fitted: None,
            matrix: None,
        }
    };

    let single = |controls, language, adapt| StagePlan {
        controls,
        language,
        adapt,
        residual: false,
    };
    let stages = match family {
        Family::Controls => vec![fit_stage(data, y, &single(true, false, false), &prepared, cfg, 0)?],
        Family::Language => vec![fit_stage(data, y, &single(false, true, false), &prepared, cfg, 0)?],
        Family::Added => vec![fit_stage(data, y, &single(true, true, false), &prepared, cfg, 0)?],
        Family::Fa => vec![fit_stage(data, y, &single(false, true, true), &prepared, cfg, 0)?],
        Family::Rc | Family::Rfa => {
            let first = fit_stage(data, y, &single(true, false, false), &prepared, cfg, 0)?;
            let fitted = first.predict(data, prepared.matrix.as_ref())?;
            let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let plan = StagePlan {
                controls: false,
                language: true,
                adapt: family == Family::Rfa,
                residual: true,
            };
            let second = fit_stage(data, &residuals, &plan, &prepared, cfg, 1)?;
            vec![first, second]
        }
    };
    Ok(FittedModel {
        family,
        fs_strategy: cfg.fs_strategy,
        factors: prepared.fitted,
        stages,
    })
}

pub fn fit_controls_only(data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    fit(Family::Controls, data, cfg)
}

pub fn fit_language_only(data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    fit(Family::Language, data, cfg)
}

pub fn fit_added_controls(data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    fit(Family::Added, data, cfg)
}

pub fn fit_rc(data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    fit(Family::Rc, data, cfg)
}

pub fn fit_fa(data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    fit(Family::Fa, data, cfg)
}

pub fn fit_rfa(data: &Dataset, cfg: &PipelineConfig) -> Result<FittedModel> {
    fit(Family::Rfa, data, cfg)
}
