//! Python bindings.
//!
//! Data crosses the boundary as plain dicts:
//!
//! ```python
//! {
//!     "ids": ["a", "b", ...],
//!     "outcome": [1.0, 2.0, ...],          # optional for predict
//!     "factors": {"names": [...], "values": [[...], ...]},
//!     "ngrams": {"names": [...], "values": [[...], ...]},
//!     "topics": {"names": [...], "values": [[...], ...]},
//! }
//! ```
//!
//! `values` is row-major, one row per id. Every table is optional except
//! those the chosen family needs.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rfa_core::config::parse_toml;
use rfa_core::data::{Dataset, FeatureTable, GroupLabel, OutcomeVector};
use rfa_core::experiments::{generate_synthetic, run_cv, FoldPlan, ModelSpec, SyntheticSpec};
use rfa_core::numerics::Matrix;
use rfa_core::pipelines::{self, Family, FittedModel, PipelineConfig};

create_exception!(rfa, RfaError, PyException);

fn py_err(e: rfa_core::Error) -> PyErr {
    RfaError::new_err(e.to_string())
}

/// A named row-major table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableInput {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataInput {
    pub ids: Vec<String>,
    pub outcome: Option<Vec<f64>>,
    pub factors: Option<TableInput>,
    pub ngrams: Option<TableInput>,
    pub topics: Option<TableInput>,
}

fn table(group: GroupLabel, ids: &[String], t: &TableInput) -> rfa_core::Result<FeatureTable> {
    let values = if t.names.is_empty() {
        Matrix::zeros(ids.len(), 0)
    } else if t.values.is_empty() {
        Matrix::zeros(0, t.names.len())
    } else {
        Matrix::from_rows(&t.values)?
    };
    FeatureTable::new(group, ids.to_vec(), t.names.clone(), values)
}

fn table_output(t: &FeatureTable) -> TableInput {
    TableInput {
        names: t.feature_names().to_vec(),
        values: t.values().to_rows(),
    }
}

impl DataInput {
    pub fn to_dataset(&self) -> rfa_core::Result<Dataset> {
        let ids = &self.ids;
        let mut language = Vec::new();
        for (group, t) in [(GroupLabel::Ngrams, &self.ngrams), (GroupLabel::Topics, &self.topics)] {
            if let Some(t) = t {
                language.push(table(group, ids, t)?);
            }
        }
        let factors = match &self.factors {
            Some(t) => table(GroupLabel::Factors, ids, t)?,
            None => FeatureTable::new(
                GroupLabel::Factors,
                ids.clone(),
                Vec::new(),
                Matrix::zeros(ids.len(), 0),
            )?,
        };
        let y = self.outcome.clone().unwrap_or_else(|| vec![0.0; ids.len()]);
        Dataset::new(language, factors, OutcomeVector::new("outcome", ids.clone(), y)?)
    }

    pub fn from_dataset(d: &Dataset) -> Self {
        DataInput {
            ids: d.instance_ids().to_vec(),
            outcome: Some(d.outcome().values().to_vec()),
            factors: (d.factors().n_features() > 0).then(|| table_output(d.factors())),
            ngrams: d.language_group(GroupLabel::Ngrams).map(table_output),
            topics: d.language_group(GroupLabel::Topics).map(table_output),
        }
    }
}

fn extract_table(dict: &Bound<'_, PyDict>, key: &str) -> PyResult<Option<TableInput>> {
    let Some(t) = dict.get_item(key)? else {
        return Ok(None);
    };
    if t.is_none() {
        return Ok(None);
    }
    let t = t.cast::<PyDict>()?;
    let get = |k: &str| -> PyResult<Bound<'_, PyAny>> {
        t.get_item(k)?
            .ok_or_else(|| RfaError::new_err(format!("table {key:?} lacks {k:?}")))
    };
    Ok(Some(TableInput {
        names: get("names")?.extract()?,
        values: get("values")?.extract()?,
    }))
}

fn extract_data(dict: &Bound<'_, PyDict>) -> PyResult<DataInput> {
    let ids: Vec<String> = dict
        .get_item("ids")?
        .ok_or_else(|| RfaError::new_err("data dict lacks \"ids\""))?
        .extract()?;
    let outcome = match dict.get_item("outcome")? {
        Some(v) if !v.is_none() => Some(v.extract()?),
        _ => None,
    };
    Ok(DataInput {
        ids,
        outcome,
        factors: extract_table(dict, "factors")?,
        ngrams: extract_table(dict, "ngrams")?,
        topics: extract_table(dict, "topics")?,
    })
}

fn data_to_dict<'py>(py: Python<'py>, d: &DataInput) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("ids", &d.ids)?;
    out.set_item("outcome", &d.outcome)?;
    for (key, t) in [("factors", &d.factors), ("ngrams", &d.ngrams), ("topics", &d.topics)] {
        if let Some(t) = t {
            let td = PyDict::new(py);
            td.set_item("names", &t.names)?;
            td.set_item("values", &t.values)?;
            out.set_item(key, td)?;
        }
    }
    Ok(out)
}

fn pipeline_config(config_toml: Option<&str>) -> PyResult<PipelineConfig> {
    let cfg = match config_toml {
        Some(text) => parse_toml::<PipelineConfig>(text).map_err(py_err)?,
        None => PipelineConfig::default(),
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Draws a synthetic dataset. `spec_toml` overrides generator defaults.
#[pyfunction]
#[pyo3(signature = (seed=7, spec_toml=None))]
fn synthetic<'py>(py: Python<'py>, seed: u64, spec_toml: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let spec = match spec_toml {
        Some(text) => SyntheticSpec::from_toml_str(text).map_err(py_err)?,
        None => SyntheticSpec::default(),
    }
    .with_seed(seed);
    let (data, _) = generate_synthetic(&spec).map_err(py_err)?;
    data_to_dict(py, &DataInput::from_dataset(&data))
}

/// A fitted model.
#[pyclass(module = "rfa", frozen)]
struct Model {
    inner: FittedModel,
}

#[pymethods]
impl Model {
    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.as_str()
    }

    fn predict(&self, data: &Bound<'_, PyDict>) -> PyResult<Vec<f64>> {
        let d = extract_data(data)?.to_dataset().map_err(py_err)?;
        pipelines::predict(&self.inner, &d).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Model> {
        Ok(Model {
            inner: FittedModel::from_json(s).map_err(py_err)?,
        })
    }
}

/// Fits `family` on every row of `data`.
#[pyfunction]
#[pyo3(signature = (family, data, config_toml=None))]
fn fit(family: &str, data: &Bound<'_, PyDict>, config_toml: Option<&str>) -> PyResult<Model> {
    let family: Family = family.parse().map_err(py_err)?;
    let d = extract_data(data)?.to_dataset().map_err(py_err)?;
    let cfg = pipeline_config(config_toml)?;
    Ok(Model {
        inner: pipelines::fit(family, &d, &cfg).map_err(py_err)?,
    })
}

/// K-fold cross-validation; returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (data, families=None, folds=10, seed=0, config_toml=None))]
fn cross_validate(
    data: &Bound<'_, PyDict>,
    families: Option<Vec<String>>,
    folds: usize,
    seed: u64,
    config_toml: Option<&str>,
) -> PyResult<String> {
    let d = extract_data(data)?.to_dataset().map_err(py_err)?;
    let families: Vec<Family> = match families {
        Some(names) => names
            .iter()
            .map(|n| n.parse())
            .collect::<rfa_core::Result<_>>()
            .map_err(py_err)?,
        None => Family::ALL.to_vec(),
    };
    let cfg = PipelineConfig {
        seed,
        ..pipeline_config(config_toml)?
    };
    let plan = FoldPlan::new(d.instance_ids(), folds, seed).map_err(py_err)?;
    let report = run_cv(&d, &ModelSpec::families(&families, &cfg), &plan, 1).map_err(py_err)?;
    report.to_json().map_err(py_err)
}

#[pymodule]
fn rfa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RfaError", m.py().get_type::<RfaError>())?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
