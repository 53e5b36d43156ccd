use serde::{Deserialize, Serialize};

use super::config::{FsStrategy, GroupReduction, PipelineConfig};
use super::derive_seed;
use crate::adaptation::{adapt, adapt_columns, adapted_names};
use crate::data::{Dataset, FeatureTable, GroupLabel};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, PcaMethod};
use crate::preprocessing::{kbest_fit, pca_transform_fit, reduce_group, zscore_fit_apply, FittedTransform};

/// Which factor matrix feeds the control columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlsSource {
    /// Raw factor columns, looked up by name.
    Raw,
    /// The model's prepared (scaled, selected) factors.
    Prepared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlsInput {
    pub source: ControlsSource,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageChain {
    pub group: GroupLabel,
    pub transform: FittedTransform,
}

/// Which language matrix gets multiplied by the factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptSource {
    /// The raw group, before reduction.
    Raw,
    /// The group's reduced output (EarlyFS).
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedChain {
    pub group: GroupLabel,
    pub base: GroupLabel,
    pub source: AdaptSource,
    /// Applied to the adapted matrix.
    pub transform: FittedTransform,
}

/// Frozen recipe for one stage's design matrix, before the final
/// standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub strategy: FsStrategy,
    pub controls: Option<ControlsInput>,
    pub language: Vec<LanguageChain>,
    pub adapted: Vec<AdaptedChain>,
    /// CombinedFS reduction over the language and adapted outputs.
    pub combined: Option<FittedTransform>,
}

impl FittedFeatures {
    pub fn output_names(&self) -> Vec<String> {
        let mut names = self.controls.as_ref().map_or_else(Vec::new, |c| c.names.clone());
        match &self.combined {
            Some(c) => names.extend(c.output_names.iter().cloned()),
            None => {
                for l in &self.language {
                    names.extend(l.transform.output_names.iter().cloned());
                }
                for a in &self.adapted {
                    names.extend(a.transform.output_names.iter().cloned());
                }
            }
        }
        names
    }

    pub fn width(&self) -> usize {
        self.output_names().len()
    }

    /// Builds the design matrix for `data`. `prepared` holds the model's
    /// prepared factors for the same rows.
    pub fn assemble(&self, data: &Dataset, prepared: Option<&Matrix>) -> Result<Matrix> {
        let n = data.n_instances();
        let mut parts: Vec<Matrix> = Vec::new();
        if let Some(c) = &self.controls {
            parts.push(match c.source {
                ControlsSource::Raw => select_by_name(data.factors(), &c.names)?,
                ControlsSource::Prepared => prepared_or_err(prepared)?.clone(),
            });
        }
        let mut lang_raw = Vec::with_capacity(self.language.len());
        let mut lang_out = Vec::with_capacity(self.language.len());
        for chain in &self.language {
            let table = data
                .language_group(chain.group)
                .ok_or_else(|| Error::Data(format!("dataset has no {} table", chain.group)))?;
            let raw = select_by_name(table, &chain.transform.input_names)?;
            lang_out.push(chain.transform.apply(&raw)?);
            lang_raw.push(raw);
        }
        let mut adapted_out = Vec::with_capacity(self.adapted.len());
        for a in &self.adapted {
            let pos = self
                .language
                .iter()
                .position(|l| l.group == a.base)
                .ok_or_else(|| Error::Data(format!("adapted group {} has no base chain", a.group)))?;
            let base = match a.source {
                AdaptSource::Raw => &lang_raw[pos],
                AdaptSource::Reduced => &lang_out[pos],
            };
            let fac = prepared_or_err(prepared)?;
            // Build only the adapted columns the chain keeps.
            let out = match a.transform.leading_selection() {
                Some((cols, rest)) => {
                    if base.ncols() * fac.ncols() != a.transform.input_names.len() {
                        return Err(Error::DimensionMismatch(format!(
                            "{} expects {} adapted columns, got {}",
                            a.group,
                            a.transform.input_names.len(),
                            base.ncols() * fac.ncols()
                        )));
                    }
                    let mut cur = adapt_columns(base, fac, cols)?;
                    for step in rest {
                        cur = step.apply(&cur)?;
                    }
                    cur
                }
                None => a.transform.apply(&adapt(base, fac)?)?,
            };
            adapted_out.push(out);
        }
        match &self.combined {
            Some(c) => {
                let pooled: Vec<&Matrix> = lang_out.iter().chain(&adapted_out).collect();
                parts.push(c.apply(&Matrix::hstack(n, &pooled)?)?);
            }
            None => parts.extend(lang_out.into_iter().chain(adapted_out)),
        }
        Matrix::hstack(n, &parts.iter().collect::<Vec<_>>())
    }
}

fn prepared_or_err(prepared: Option<&Matrix>) -> Result<&Matrix> {
    prepared.ok_or_else(|| Error::Data("model needs prepared factors but none were supplied".into()))
}

fn select_by_name(table: &FeatureTable, names: &[String]) -> Result<Matrix> {
    if table.feature_names() == names {
        return Ok(table.values().clone());
    }
    let missing: Vec<&String> = names
        .iter()
        .filter(|n| !table.feature_names().contains(n))
        .take(5)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "{} table lacks features the model was fitted on: {missing:?}",
            table.group()
        )));
    }
    Ok(table.select_named(names)?.values().clone())
}

/// Factor inputs available to a stage.
pub struct FactorInputs<'a> {
    pub prepared: Option<&'a Matrix>,
    pub prepared_names: &'a [String],
}

fn group_tag(g: GroupLabel) -> u64 {
    match g {
        GroupLabel::Ngrams => 1,
        GroupLabel::Topics => 2,
        GroupLabel::AdaptedNgrams => 3,
        GroupLabel::AdaptedTopics => 4,
        GroupLabel::Factors => 5,
    }
}

const COMBINED_TAG: u64 = 6;

fn reduce(
    x: &Matrix,
    y: &[f64],
    names: &[String],
    r: GroupReduction,
    seed: u64,
    prefix: &str,
) -> Result<FittedTransform> {
    let r = r.capped(x.ncols(), x.nrows());
    Ok(reduce_group(x, y, names, r.k_best, r.n_components, seed, prefix)?.0)
}

/// Fits the per-group language and adapted-language transforms for one
/// stage under `strategy`, with selection driven by `target`.
///
/// Adapted groups are built only when `adapt_with` carries at least one
/// prepared factor.
pub fn apply_fs_strategy(
    strategy: FsStrategy,
    data: &Dataset,
    target: &[f64],
    adapt_with: Option<&FactorInputs<'_>>,
    cfg: &PipelineConfig,
) -> Result<(FittedFeatures, Matrix)> {
    let features = fit_language_features(strategy, data, target, adapt_with, cfg)?;
    let x = features.assemble(data, adapt_with.and_then(|f| f.prepared))?;
    Ok((features, x))
}

pub(crate) fn fit_language_features(
    strategy: FsStrategy,
    data: &Dataset,
    target: &[f64],
    adapt_with: Option<&FactorInputs<'_>>,
    cfg: &PipelineConfig,
) -> Result<FittedFeatures> {
    let mut language = Vec::new();
    let mut adapted = Vec::new();
    // CombinedFS pools language outputs first, then adapted ones.
    let mut pooled: Vec<(Matrix, Vec<String>, GroupReduction)> = Vec::new();
    let mut pooled_adapted: Vec<(Matrix, Vec<String>, GroupReduction)> = Vec::new();
    let factors = adapt_with.and_then(|f| f.prepared.map(|p| (p, f.prepared_names)));
    let factors = factors.filter(|(p, _)| p.ncols() > 0);

    for table in data.language() {
        let g = table.group();
        let names = table.feature_names().to_vec();
        let raw = table.values();
        let red = cfg.reduction_for(g);
        let transform = match strategy {
            FsStrategy::NoFs | FsStrategy::CombinedFs => FittedTransform::identity(&names),
            FsStrategy::SeparatedFs | FsStrategy::EarlyFs => reduce(
                raw,
                target,
                &names,
                red,
                derive_seed(cfg.seed, group_tag(g)),
                &format!("{g}:"),
            )?,
        };
        if strategy == FsStrategy::CombinedFs {
            pooled.push((raw.clone(), names.clone(), red));
        }

        if let Some((fac, fac_names)) = factors {
            let ag = g.adapted().expect("language groups have adapted counterparts");
            let (base, base_names, source) = if strategy == FsStrategy::EarlyFs {
                (
                    transform.apply(raw)?,
                    transform.output_names.clone(),
                    AdaptSource::Reduced,
                )
            } else {
                (raw.clone(), names.clone(), AdaptSource::Raw)
            };
            let a_names = adapted_names(&base_names, fac_names);
            let adapted_raw = adapt(&base, fac)?;
            let transform = match strategy {
                FsStrategy::SeparatedFs => {
                    // Correlation ranking ignores per-column scaling, so the
                    // z-score is fitted on the survivors only.
                    let r = cfg.reduction_for(ag).capped(adapted_raw.ncols(), adapted_raw.nrows());
                    let kbest = kbest_fit(&adapted_raw, target, r.k_best, &a_names)?;
                    let (zscore, z, _) = zscore_fit_apply(&kbest.apply(&adapted_raw)?, &kbest.output_names, &[])?;
                    let pca = pca_transform_fit(
                        &z,
                        &kbest.output_names,
                        r.n_components,
                        PcaMethod::Randomized,
                        derive_seed(cfg.seed, group_tag(ag)),
                        &format!("{ag}:"),
                    )?;
                    FittedTransform::chain(&a_names, vec![kbest, zscore, pca])
                }
                _ => {
                    let (zscore, z, _) = zscore_fit_apply(&adapted_raw, &a_names, &[])?;
                    if strategy == FsStrategy::CombinedFs {
                        pooled_adapted.push((z, a_names.clone(), cfg.reduction_for(ag)));
                    }
                    FittedTransform::chain(&a_names, vec![zscore])
                }
            };
            adapted.push(AdaptedChain {
                group: ag,
                base: g,
                source,
                transform,
            });
        }
        language.push(LanguageChain { group: g, transform });
    }

    pooled.extend(pooled_adapted);
    let combined = if strategy == FsStrategy::CombinedFs && !pooled.is_empty() {
        let n = data.n_instances();
        let red = cfg.combined.unwrap_or_else(|| {
            pooled.iter().fold(
                GroupReduction {
                    k_best: 0,
                    n_components: 0,
                },
                |acc, (m, _, r)| {
                    let c = r.capped(m.ncols(), m.nrows());
                    GroupReduction {
                        k_best: acc.k_best + c.k_best,
                        n_components: acc.n_components + c.n_components,
                    }
                },
            )
        });
        let mats: Vec<&Matrix> = pooled.iter().map(|(m, _, _)| m).collect();
        let names: Vec<String> = pooled.iter().flat_map(|(_, n, _)| n.iter().cloned()).collect();
        Some(reduce(
            &Matrix::hstack(n, &mats)?,
            target,
            &names,
            red,
            derive_seed(cfg.seed, COMBINED_TAG),
            "combined:",
        )?)
    } else {
        None
    };

    Ok(FittedFeatures {
        strategy,
        controls: None,
        language,
        adapted,
        combined,
    })
}
