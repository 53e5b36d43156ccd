//! CSV ingestion and export for feature tables and outcomes.
//!
//! Two layouts are understood, both UTF-8 and comma-delimited; a `.gz`
//! suffix selects gzip (de)compression.
//!
//! * long: `group_id,feature,value`, one cell per line; absent cells are 0.
//! * wide: `group_id,<feat1>,<feat2>,...`, one instance per line.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::table::{FeatureTable, GroupLabel, OutcomeVector};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    Ok(if is_gz(path) {
        Box::new(GzDecoder::new(reader))
    } else {
        Box::new(reader)
    })
}

fn create(path: &Path) -> Result<Box<dyn Write>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let writer = BufWriter::new(file);
    Ok(if is_gz(path) {
        Box::new(GzEncoder::new(writer, Compression::default()))
    } else {
        Box::new(writer)
    })
}

fn reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn parse_value(path: &Path, line: usize, raw: &str) -> Result<f64> {
    if raw.is_empty() {
        return Ok(0.0);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(path, line, format!("non-numeric value {raw:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite value {raw:?}")));
    }
    Ok(v)
}

fn headers(path: &Path, rdr: &mut csv::Reader<Box<dyn Read>>) -> Result<Vec<String>> {
    let h = rdr.headers().map_err(|e| csv_error(path, e))?;
    if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
        return Err(Error::NoData { path: path.into() });
    }
    Ok(h.iter().map(str::to_owned).collect())
}

/// Reads a long-format table and pivots it wide. Features come out in
/// lexicographic order, instances in order of first appearance.
pub fn load_long_csv(path: impl AsRef<Path>, group: GroupLabel) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header != ["group_id", "feature", "value"] {
        return Err(Error::parse(
            path,
            1,
            format!("expected header group_id,feature,value, got {}", header.join(",")),
        ));
    }
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut cells: BTreeMap<String, HashMap<usize, f64>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let (id, feature) = (&record[0], &record[1]);
        if id.is_empty() || feature.is_empty() {
            return Err(Error::parse(path, line, "empty group_id or feature"));
        }
        let value = parse_value(path, line, &record[2])?;
        let row = *id_index.entry(id.to_owned()).or_insert_with(|| {
            ids.push(id.to_owned());
            ids.len() - 1
        });
        let column = cells.entry(feature.to_owned()).or_default();
        if column.insert(row, value).is_some() {
            return Err(Error::parse(path, line, format!("duplicate cell ({id}, {feature})")));
        }
    }
    if ids.is_empty() {
        return Err(Error::NoData { path: path.into() });
    }
    let n = ids.len();
    let names: Vec<String> = cells.keys().cloned().collect();
    let columns: Vec<Vec<f64>> = cells
        .values()
        .map(|col| {
            let mut dense = vec![0.0; n];
            for (&r, &v) in col {
                dense[r] = v;
            }
            dense
        })
        .collect();
    FeatureTable::new(group, ids, names, Matrix::from_columns(n, &columns)?)
}

pub fn load_wide_csv(path: impl AsRef<Path>, group: GroupLabel) -> Result<FeatureTable> {
    let path = path.as_ref();
    let (ids, names, rows) = read_wide(path)?;
    let values = Matrix::from_rows(&rows)?;
    FeatureTable::new(group, ids, names, values).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads a wide file with a single value column (or the named one when the
/// file has several) as an outcome.
pub fn load_outcome_csv(path: impl AsRef<Path>, column: Option<&str>) -> Result<OutcomeVector> {
    let path = path.as_ref();
    let (ids, names, rows) = read_wide(path)?;
    let j = match column {
        Some(c) => names
            .iter()
            .position(|n| n == c)
            .ok_or_else(|| Error::Data(format!("{}: no column {c:?}", path.display())))?,
        None if names.len() == 1 => 0,
        None => {
            return Err(Error::Data(format!(
                "{}: {} value columns; name the one to use",
                path.display(),
                names.len()
            )))
        }
    };
    OutcomeVector::new(names[j].clone(), ids, rows.iter().map(|r| r[j]).collect())
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

type WideRows = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

fn read_wide(path: &Path) -> Result<WideRows> {
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header[0] != "group_id" {
        return Err(Error::parse(path, 1, "first header column must be group_id"));
    }
    let names: Vec<String> = header[1..].to_vec();
    let mut seen = HashMap::new();
    for n in &names {
        if seen.insert(n.clone(), ()).is_some() {
            return Err(Error::parse(path, 1, format!("duplicate feature column {n:?}")));
        }
    }
    let mut ids = Vec::new();
    let mut id_lines: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                format!("ragged row: {} fields, header has {}", record.len(), header.len()),
            ));
        }
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty group_id"));
        }
        if let Some(first) = id_lines.insert(id.clone(), line) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate group_id {id:?} (first on line {first})"),
            ));
        }
        let row = (1..record.len())
            .map(|j| parse_value(path, line, &record[j]))
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        rows.push(row);
    }
    if ids.is_empty() {
        return Err(Error::NoData { path: path.into() });
    }
    Ok((ids, names, rows))
}

/// Writes the non-zero cells of a table in long format. An instance or
/// feature with no non-zero cell gets one explicit zero so that it survives
/// a reload.
pub fn save_long_csv(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let io_err = |e: csv::Error| csv_error(path, e);
    w.write_record(["group_id", "feature", "value"]).map_err(io_err)?;
    let m = table.values();
    let mut feature_seen = vec![false; table.n_features()];
    let mut pending_zero: Vec<usize> = (0..table.n_features())
        .filter(|&j| m.column(j).iter().all(|v| *v == 0.0))
        .collect();
    for (i, id) in table.instance_ids().iter().enumerate() {
        let mut wrote = false;
        for (j, name) in table.feature_names().iter().enumerate() {
            let v = m.get(i, j);
            if v != 0.0 {
                w.write_record([id.as_str(), name.as_str(), &v.to_string()])
                    .map_err(io_err)?;
                feature_seen[j] = true;
                wrote = true;
            }
        }
        if let Some(j) = pending_zero.pop() {
            w.write_record([id.as_str(), table.feature_names()[j].as_str(), "0"])
                .map_err(io_err)?;
            wrote = true;
        }
        if !wrote && table.n_features() > 0 {
            w.write_record([id.as_str(), table.feature_names()[0].as_str(), "0"])
                .map_err(io_err)?;
        }
    }
    // More all-zero features than instances: attach the rest to the first id.
    if let Some(first) = table.instance_ids().first() {
        for j in pending_zero {
            w.write_record([first.as_str(), table.feature_names()[j].as_str(), "0"])
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_wide_csv(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let io_err = |e: csv::Error| csv_error(path, e);
    let mut header = vec!["group_id".to_owned()];
    header.extend(table.feature_names().iter().cloned());
    w.write_record(&header).map_err(io_err)?;
    for (i, id) in table.instance_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(table.values().row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_outcome_csv(outcome: &OutcomeVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let io_err = |e: csv::Error| csv_error(path, e);
    w.write_record(["group_id", outcome.name()]).map_err(io_err)?;
    for (id, v) in outcome.instance_ids().iter().zip(outcome.values()) {
        w.write_record([id.as_str(), &v.to_string()]).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
