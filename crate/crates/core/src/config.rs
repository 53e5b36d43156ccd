//! TOML run configuration shared by the command-line tools.
//!
//! ```toml
//! [data]
//! outcome = "outcome.csv"
//! factors = "factors.csv"
//!
//! [[data.language]]
//! group = "ngrams"
//! path = "ngrams.csv"
//! format = "long"
//!
//! [preprocessing]
//! coverage_fraction = 0.95
//!
//! [pipeline.ngrams]
//! k_best = 250
//! n_components = 40
//!
//! [experiment]
//! families = ["controls", "rc", "rfa"]
//! folds = 10
//! seed = 7
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{
    align, drop_low_wordcount, load_long_csv, load_outcome_csv, load_wide_csv, prune_by_coverage, Dataset, DropReport,
    FeatureTable, GroupLabel, OutcomeVector,
};
use crate::error::{Error, Result};
use crate::experiments::FactorMethod;
use crate::pipelines::{Family, FsStrategy, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    #[default]
    Long,
    Wide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageSource {
    pub group: GroupLabel,
    pub path: PathBuf,
    #[serde(default)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub language: Vec<LanguageSource>,
    /// Wide CSV of factor columns.
    pub factors: Option<PathBuf>,
    /// Subset of factor columns to keep, in order.
    pub factor_columns: Option<Vec<String>>,
    pub outcome: PathBuf,
    pub outcome_column: Option<String>,
    /// Wide CSV of per-instance word counts.
    pub wordcount: Option<PathBuf>,
    pub wordcount_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    /// Keep n-grams used by at least this fraction of instances.
    pub coverage_fraction: Option<f64>,
    /// Drop instances with fewer words than this.
    pub wordcount_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub families: Vec<Family>,
    pub folds: usize,
    /// Drives the fold plan and every seeded step of the pipelines.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            families: Family::ALL.to_vec(),
            folds: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kbest: Vec<usize>,
    pub kbest_families: Vec<Family>,
    pub factor_method: FactorMethod,
    /// Empty means 1 through the number of available factors.
    pub factor_counts: Vec<usize>,
    pub factor_families: Vec<Family>,
    pub interactions: bool,
    pub strategies: Vec<FsStrategy>,
    pub fs_families: Vec<Family>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kbest: vec![50, 100, 250, 500, 1000, 2000, 5000, 10_000],
            kbest_families: vec![Family::Fa, Family::Rfa],
            factor_method: FactorMethod::Pca,
            factor_counts: Vec::new(),
            factor_families: vec![Family::Rc, Family::Fa, Family::Rfa],
            interactions: false,
            strategies: FsStrategy::ALL.to_vec(),
            fs_families: vec![Family::Rfa],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses and validates a config; relative paths resolve against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = parse_toml(text)?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Replaces the run seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.seed = seed;
        self.pipeline.seed = seed;
        self
    }

    pub fn with_families(mut self, families: Vec<Family>) -> Result<Self> {
        self.experiment.families = families;
        self.validate()?;
        Ok(self)
    }

    /// The pipeline settings with the run seed applied.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.experiment.seed,
            ..self.pipeline.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let mut seen = HashSet::new();
        for (i, l) in self.data.language.iter().enumerate() {
            if !matches!(l.group, GroupLabel::Ngrams | GroupLabel::Topics) {
                return bad(format!(
                    "data.language[{i}].group: expected ngrams or topics, got {}",
                    l.group
                ));
            }
            if !seen.insert(l.group) {
                return bad(format!("data.language[{i}].group: {} listed twice", l.group));
            }
        }
        if let Some(f) = self.preprocessing.coverage_fraction {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("preprocessing.coverage_fraction: {f} is outside [0, 1]"));
            }
        }
        if let Some(w) = self.preprocessing.wordcount_min {
            if !w.is_finite() || w < 0.0 {
                return bad(format!("preprocessing.wordcount_min: {w} must be >= 0"));
            }
            if self.data.wordcount.is_none() {
                return bad("preprocessing.wordcount_min: needs data.wordcount".into());
            }
        }
        if self.experiment.families.is_empty() {
            return bad("experiment.families: at least one family is required".into());
        }
        if self.experiment.folds < 2 {
            return bad(format!(
                "experiment.folds: need at least 2, got {}",
                self.experiment.folds
            ));
        }
        let needs_factors = self.experiment.families.iter().any(|f| f.uses_controls() || f.adapts());
        if needs_factors && self.data.factors.is_none() {
            return bad("data.factors: required by the selected families".into());
        }
        let needs_language = self.experiment.families.iter().any(|f| f.uses_language());
        if needs_language && self.data.language.is_empty() {
            return bad("data.language: required by the selected families".into());
        }
        self.pipeline
            .validate()
            .map_err(|e| Error::Config(format!("pipeline: {}", strip_config_prefix(&e))))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load_tables(&self) -> Result<Vec<FeatureTable>> {
        let mut tables = Vec::new();
        for l in &self.data.language {
            let path = self.resolve(&l.path);
            tables.push(match l.format {
                TableFormat::Long => load_long_csv(&path, l.group)?,
                TableFormat::Wide => load_wide_csv(&path, l.group)?,
            });
        }
        if let Some(f) = &self.data.factors {
            let path = self.resolve(f);
            let mut t = load_wide_csv(&path, GroupLabel::Factors)?;
            if let Some(cols) = &self.data.factor_columns {
                t = t
                    .select_named(cols)
                    .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            }
            tables.push(t);
        }
        Ok(tables)
    }

    fn filter_wordcount(&self, data: Dataset) -> Result<Dataset> {
        match (self.preprocessing.wordcount_min, &self.data.wordcount) {
            (Some(min), Some(wc)) => {
                let counts = load_outcome_csv(self.resolve(wc), self.data.wordcount_column.as_deref())?;
                drop_low_wordcount(&data, &counts, min)
            }
            _ => Ok(data),
        }
    }

    /// Loads the feature tables for prediction. No outcome file is read
    /// (outcome values are zero) and coverage pruning is skipped, so every
    /// feature a saved model was fitted on stays available.
    pub fn load_features(&self) -> Result<Dataset> {
        let tables = self.load_tables()?;
        let first = tables
            .first()
            .ok_or_else(|| Error::Config("data: no feature tables configured".into()))?;
        let ids = first.instance_ids().to_vec();
        let placeholder = OutcomeVector::new("prediction", ids.clone(), vec![0.0; ids.len()])?;
        let (data, _) = align(&tables, &placeholder)?;
        self.filter_wordcount(data)
    }

    /// Loads, aligns and filters the configured data. Word-count filtering
    /// runs before coverage pruning, so coverage is measured on the
    /// instances that remain.
    pub fn load_dataset(&self) -> Result<(Dataset, DropReport)> {
        let tables = self.load_tables()?;
        let outcome = load_outcome_csv(self.resolve(&self.data.outcome), self.data.outcome_column.as_deref())?;
        let (data, report) = align(&tables, &outcome)?;
        let mut data = self.filter_wordcount(data)?;
        if let Some(frac) = self.preprocessing.coverage_fraction {
            let language = data
                .language()
                .iter()
                .map(|t| {
                    if t.group() == GroupLabel::Ngrams {
                        prune_by_coverage(t, frac)
                    } else {
                        Ok(t.clone())
                    }
                })
                .collect::<Result<Vec<FeatureTable>>>()?;
            data = data.with_language(language)?;
        }
        Ok((data, report))
    }
}

/// Deserializes TOML, reporting failures as config errors that name the
/// offending key path.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config(e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("{path}: {}", e.into_inner().message()))
    })
}

fn strip_config_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
