use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Which family of features a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupLabel {
    Ngrams,
    Topics,
    Factors,
    AdaptedNgrams,
    AdaptedTopics,
}

impl GroupLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::Ngrams => "ngrams",
            GroupLabel::Topics => "topics",
            GroupLabel::Factors => "factors",
            GroupLabel::AdaptedNgrams => "adapted-ngrams",
            GroupLabel::AdaptedTopics => "adapted-topics",
        }
    }

    /// The adapted counterpart of a language group.
    pub fn adapted(self) -> Option<GroupLabel> {
        match self {
            GroupLabel::Ngrams => Some(GroupLabel::AdaptedNgrams),
            GroupLabel::Topics => Some(GroupLabel::AdaptedTopics),
            _ => None,
        }
    }

    pub fn is_language(self) -> bool {
        matches!(self, GroupLabel::Ngrams | GroupLabel::Topics)
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ngrams" => GroupLabel::Ngrams,
            "topics" => GroupLabel::Topics,
            "factors" => GroupLabel::Factors,
            "adapted-ngrams" => GroupLabel::AdaptedNgrams,
            "adapted-topics" => GroupLabel::AdaptedTopics,
            other => return Err(Error::InvalidArgument(format!("unknown group label {other:?}"))),
        })
    }
}

fn check_unique(what: &str, items: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for s in items {
        if !seen.insert(s.as_str()) {
            return Err(Error::Data(format!("duplicate {what} {s:?}")));
        }
    }
    Ok(())
}

/// Instances x named features, one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    group: GroupLabel,
    instance_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Matrix,
}

impl FeatureTable {
    pub fn new(
        group: GroupLabel,
        instance_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Matrix,
    ) -> Result<Self> {
        if values.nrows() != instance_ids.len() || values.ncols() != feature_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} table: {} ids x {} features but matrix is {}x{}",
                group,
                instance_ids.len(),
                feature_names.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        check_unique("instance id", &instance_ids)?;
        check_unique("feature name", &feature_names)?;
        Ok(FeatureTable {
            group,
            instance_ids,
            feature_names,
            values,
        })
    }

    pub fn group(&self) -> GroupLabel {
        self.group
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            group: self.group,
            instance_ids: rows.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values: self.values.select_rows(rows),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> FeatureTable {
        FeatureTable {
            group: self.group,
            instance_ids: self.instance_ids.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            values: self.values.select_columns(cols),
        }
    }

    /// Keeps the named features, in the order given.
    pub fn select_named(&self, names: &[String]) -> Result<FeatureTable> {
        let index: HashMap<&str, usize> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let cols = names
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("{} table has no feature {n:?}", self.group)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_features(&cols))
    }
}

/// Per-instance numeric target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeVector {
    name: String,
    instance_ids: Vec<String>,
    values: Vec<f64>,
}

impl OutcomeVector {
    pub fn new(name: impl Into<String>, instance_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if instance_ids.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids but {} values",
                instance_ids.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite outcome for {:?}", instance_ids[i])));
        }
        check_unique("instance id", &instance_ids)?;
        Ok(OutcomeVector {
            name: name.into(),
            instance_ids,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select_rows(&self, rows: &[usize]) -> OutcomeVector {
        OutcomeVector {
            name: self.name.clone(),
            instance_ids: rows.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            values: rows.iter().map(|&i| self.values[i]).collect(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<OutcomeVector> {
        OutcomeVector::new(self.name.clone(), self.instance_ids.clone(), values)
    }
}

/// Row-aligned language tables, factor table and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    language: Vec<FeatureTable>,
    factors: FeatureTable,
    outcome: OutcomeVector,
}

impl Dataset {
    /// Builds a dataset from tables that already share one id list.
    pub fn new(language: Vec<FeatureTable>, factors: FeatureTable, outcome: OutcomeVector) -> Result<Self> {
        let ids = outcome.instance_ids();
        for t in language.iter().chain(std::iter::once(&factors)) {
            if t.instance_ids() != ids {
                return Err(Error::Data(format!(
                    "{} table is not aligned with the outcome ids",
                    t.group()
                )));
            }
        }
        if factors.group() != GroupLabel::Factors {
            return Err(Error::Data(format!("factor table has group {}", factors.group())));
        }
        let mut seen = HashSet::new();
        for t in &language {
            if !t.group().is_language() {
                return Err(Error::Data(format!("{} is not a language group", t.group())));
            }
            if !seen.insert(t.group()) {
                return Err(Error::Data(format!("duplicate language group {}", t.group())));
            }
        }
        Ok(Dataset {
            language,
            factors,
            outcome,
        })
    }

    pub fn language(&self) -> &[FeatureTable] {
        &self.language
    }

    pub fn language_group(&self, group: GroupLabel) -> Option<&FeatureTable> {
        self.language.iter().find(|t| t.group() == group)
    }

    pub fn factors(&self) -> &FeatureTable {
        &self.factors
    }

    pub fn outcome(&self) -> &OutcomeVector {
        &self.outcome
    }

    pub fn instance_ids(&self) -> &[String] {
        self.outcome.instance_ids()
    }

    pub fn n_instances(&self) -> usize {
        self.outcome.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            language: self.language.iter().map(|t| t.select_rows(rows)).collect(),
            factors: self.factors.select_rows(rows),
            outcome: self.outcome.select_rows(rows),
        }
    }

    pub fn with_outcome_values(&self, values: Vec<f64>) -> Result<Dataset> {
        Ok(Dataset {
            language: self.language.clone(),
            factors: self.factors.clone(),
            outcome: self.outcome.with_values(values)?,
        })
    }

    pub fn with_language(&self, language: Vec<FeatureTable>) -> Result<Dataset> {
        Dataset::new(language, self.factors.clone(), self.outcome.clone())
    }

    pub fn with_factors(&self, factors: FeatureTable) -> Result<Dataset> {
        Dataset::new(self.language.clone(), factors, self.outcome.clone())
    }
}
