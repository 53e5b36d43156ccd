use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaptation::FactorPolicy;
use crate::data::GroupLabel;
use crate::error::{Error, Result};
use crate::numerics::PenaltyPolicy;

/// The six model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Controls,
    Language,
    Added,
    Rc,
    Fa,
    Rfa,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Controls,
        Family::Language,
        Family::Added,
        Family::Rc,
        Family::Fa,
        Family::Rfa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Controls => "controls",
            Family::Language => "language",
            Family::Added => "added",
            Family::Rc => "rc",
            Family::Fa => "fa",
            Family::Rfa => "rfa",
        }
    }

    /// Families whose prediction is a control model plus a residual model.
    pub fn is_residualized(self) -> bool {
        matches!(self, Family::Rc | Family::Rfa)
    }

    pub fn uses_controls(self) -> bool {
        matches!(self, Family::Controls | Family::Added | Family::Rc | Family::Rfa)
    }

    pub fn uses_language(self) -> bool {
        !matches!(self, Family::Controls)
    }

    pub fn adapts(self) -> bool {
        matches!(self, Family::Fa | Family::Rfa)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown model family {s:?}")))
    }
}

/// Where feature selection sits relative to adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum FsStrategy {
    #[serde(rename = "NoFS")]
    NoFs,
    #[default]
    #[serde(rename = "SeparatedFS")]
    SeparatedFs,
    #[serde(rename = "CombinedFS")]
    CombinedFs,
    #[serde(rename = "EarlyFS")]
    EarlyFs,
}

impl FsStrategy {
    pub const ALL: [FsStrategy; 4] = [
        FsStrategy::NoFs,
        FsStrategy::SeparatedFs,
        FsStrategy::CombinedFs,
        FsStrategy::EarlyFs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FsStrategy::NoFs => "NoFS",
            FsStrategy::SeparatedFs => "SeparatedFS",
            FsStrategy::CombinedFs => "CombinedFS",
            FsStrategy::EarlyFs => "EarlyFS",
        }
    }
}

impl fmt::Display for FsStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FsStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FsStrategy::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown feature-selection strategy {s:?}")))
    }
}

/// k-best then PCA sizes for one feature group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupReduction {
    pub k_best: usize,
    pub n_components: usize,
}

impl GroupReduction {
    /// Clamps to what `cols` columns and `rows` rows can support.
    pub fn capped(self, cols: usize, rows: usize) -> GroupReduction {
        let k_best = self.k_best.min(cols).max(1);
        GroupReduction {
            k_best,
            n_components: self.n_components.min(k_best).min(rows).max(1),
        }
    }
}

/// Which models see the selected factors. With `adaptation`, control models
/// always use every raw factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    #[default]
    All,
    Adaptation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ngrams: GroupReduction,
    pub topics: GroupReduction,
    /// Defaults to the matching language group's sizes.
    pub adapted_ngrams: Option<GroupReduction>,
    pub adapted_topics: Option<GroupReduction>,
    /// CombinedFS sizes; defaults to the sum over the groups being pooled.
    pub combined: Option<GroupReduction>,
    pub factors: FactorPolicy,
    pub interactions: bool,
    pub selection_scope: SelectionScope,
    pub fs_strategy: FsStrategy,
    pub penalty: PenaltyPolicy,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::health_defaults()
    }
}

impl PipelineConfig {
    /// Health and psychology outcomes: 10,000 n-grams and all 2,000 topics
    /// kept before reducing each group to 100 components.
    pub fn health_defaults() -> Self {
        PipelineConfig {
            ngrams: GroupReduction {
                k_best: 10_000,
                n_components: 100,
            },
            topics: GroupReduction {
                k_best: 2_000,
                n_components: 100,
            },
            adapted_ngrams: None,
            adapted_topics: None,
            combined: None,
            factors: FactorPolicy::All,
            interactions: false,
            selection_scope: SelectionScope::All,
            fs_strategy: FsStrategy::SeparatedFs,
            penalty: PenaltyPolicy::default(),
            seed: 0,
        }
    }

    /// Economic outcomes: 8,000 n-grams and 1,500 topics.
    pub fn economy_defaults() -> Self {
        PipelineConfig {
            ngrams: GroupReduction {
                k_best: 8_000,
                n_components: 100,
            },
            topics: GroupReduction {
                k_best: 1_500,
                n_components: 100,
            },
            ..PipelineConfig::health_defaults()
        }
    }

    pub fn reduction_for(&self, group: GroupLabel) -> GroupReduction {
        match group {
            GroupLabel::Ngrams => self.ngrams,
            GroupLabel::Topics => self.topics,
            GroupLabel::AdaptedNgrams => self.adapted_ngrams.unwrap_or(self.ngrams),
            GroupLabel::AdaptedTopics => self.adapted_topics.unwrap_or(self.topics),
            GroupLabel::Factors => self.ngrams,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let groups = [
            ("ngrams", Some(self.ngrams)),
            ("topics", Some(self.topics)),
            ("adapted_ngrams", self.adapted_ngrams),
            ("adapted_topics", self.adapted_topics),
            ("combined", self.combined),
        ];
        for (name, g) in groups {
            if let Some(g) = g {
                if g.k_best == 0 || g.n_components == 0 {
                    return Err(Error::Config(format!(
                        "{name}: k_best and n_components must be positive"
                    )));
                }
                if g.n_components > g.k_best {
                    return Err(Error::Config(format!(
                        "{name}: n_components ({}) exceeds k_best ({})",
                        g.n_components, g.k_best
                    )));
                }
            }
        }
        match &self.penalty {
            PenaltyPolicy::Fixed(p) if !(p.is_finite() && *p >= 0.0) => {
                return Err(Error::Config(format!("penalty: fixed value {p} must be >= 0")))
            }
            PenaltyPolicy::Grid { values, folds } => {
                if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Config(
                        "penalty: grid values must be non-empty and positive".into(),
                    ));
                }
                if *folds < 2 {
                    return Err(Error::Config("penalty: grid needs at least 2 folds".into()));
                }
            }
            _ => {}
        }
        match &self.factors {
            FactorPolicy::Rfe { k } | FactorPolicy::Pca { k } if *k == 0 => {
                Err(Error::Config("factors: k must be positive".into()))
            }
            FactorPolicy::Manual { names } if names.is_empty() => {
                Err(Error::Config("factors: manual selection lists no names".into()))
            }
            _ => Ok(()),
        }
    }
}
