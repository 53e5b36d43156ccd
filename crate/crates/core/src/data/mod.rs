//! Instance-aligned tables of language features, factors and outcomes.

mod io;
mod table;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use io::{load_long_csv, load_outcome_csv, load_wide_csv, save_long_csv, save_outcome_csv, save_wide_csv};
pub use table::{Dataset, FeatureTable, GroupLabel, OutcomeVector};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// How many ids each source lost to the intersection, in input order with
/// the outcome last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub kept: usize,
    pub dropped: Vec<(String, usize)>,
}

impl DropReport {
    pub fn counts(&self) -> Vec<usize> {
        self.dropped.iter().map(|(_, c)| *c).collect()
    }
}

/// Joins the tables and the outcome on their common instance ids (sorted
/// lexicographically). Language-group tables become the dataset's language
/// tables; a `factors` table, if present, becomes its factor table (an empty
/// factor table otherwise).
pub fn align(tables: &[FeatureTable], outcome: &OutcomeVector) -> Result<(Dataset, DropReport)> {
    if tables.is_empty() {
        return Err(Error::InvalidArgument("align needs at least one table".into()));
    }
    let mut common: HashSet<&str> = outcome.instance_ids().iter().map(String::as_str).collect();
    for t in tables {
        let ids: HashSet<&str> = t.instance_ids().iter().map(String::as_str).collect();
        common.retain(|id| ids.contains(id));
    }
    if common.is_empty() {
        return Err(Error::Data("no instance id is shared by every input".into()));
    }
    let mut keep: Vec<String> = common.iter().map(|s| s.to_string()).collect();
    keep.sort();

    let mut dropped = Vec::new();
    let mut language = Vec::new();
    let mut factors = None;
    for t in tables {
        dropped.push((t.group().to_string(), t.n_instances() - keep.len()));
        let rows = positions(t.instance_ids(), &keep);
        let aligned = t.select_rows(&rows);
        if t.group() == GroupLabel::Factors {
            if factors.replace(aligned).is_some() {
                return Err(Error::Data("more than one factor table".into()));
            }
        } else {
            language.push(aligned);
        }
    }
    dropped.push((format!("outcome:{}", outcome.name()), outcome.len() - keep.len()));
    let outcome = outcome.select_rows(&positions(outcome.instance_ids(), &keep));
    let factors = match factors {
        Some(f) => f,
        None => FeatureTable::new(
            GroupLabel::Factors,
            keep.clone(),
            Vec::new(),
            Matrix::zeros(keep.len(), 0),
        )?,
    };
    let report = DropReport {
        kept: keep.len(),
        dropped,
    };
    Ok((Dataset::new(language, factors, outcome)?, report))
}

fn positions(ids: &[String], keep: &[String]) -> Vec<usize> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    keep.iter().map(|k| index[k.as_str()]).collect()
}

/// Keeps features that are non-zero in at least `min_fraction` of instances.
pub fn prune_by_coverage(table: &FeatureTable, min_fraction: f64) -> Result<FeatureTable> {
    if !(0.0..=1.0).contains(&min_fraction) {
        return Err(Error::InvalidArgument(format!(
            "coverage fraction must lie in [0, 1], got {min_fraction}"
        )));
    }
    let n = table.n_instances() as f64;
    let keep: Vec<usize> = (0..table.n_features())
        .filter(|&j| {
            let nonzero = table.values().column(j).iter().filter(|v| **v != 0.0).count() as f64;
            nonzero >= min_fraction * n - 1e-9
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Data(format!(
            "coverage threshold {min_fraction} removes every {} feature",
            table.group()
        )));
    }
    Ok(table.select_features(&keep))
}

/// Drops instances whose word count is below `min_count` from every table.
pub fn drop_low_wordcount(data: &Dataset, counts: &OutcomeVector, min_count: f64) -> Result<Dataset> {
    let index: HashMap<&str, f64> = counts
        .instance_ids()
        .iter()
        .map(String::as_str)
        .zip(counts.values().iter().copied())
        .collect();
    let mut rows = Vec::new();
    for (i, id) in data.instance_ids().iter().enumerate() {
        let c = index
            .get(id.as_str())
            .ok_or_else(|| Error::Data(format!("no word count for instance {id:?}")))?;
        if *c >= min_count {
            rows.push(i);
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "word-count threshold {min_count} drops every instance"
        )));
    }
    Ok(data.subset(&rows))
}
