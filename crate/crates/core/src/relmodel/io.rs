//! CSV ingestion and serialization: one file per relation, named after the
//! relation, with a header row of attribute names.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rust_decimal::Decimal;

use super::{parse_time, Instance, Kind, RelationSignature, Tuple, Value};
use crate::error::{Error, Result};

pub fn relation_path(dir: &Path, relation: &str) -> PathBuf {
    dir.join(format!("{relation}.csv"))
}

/// Parses one trimmed cell for an attribute kind. Empty cells are Null.
pub fn parse_cell(kind: Kind, cell: &str) -> std::result::Result<Value, String> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(Value::Null);
    }
    match kind {
        Kind::Str => Ok(parse_decimal(cell)
            .map(Value::Num)
            .unwrap_or_else(|| Value::Str(cell.to_string()))),
        Kind::Num => parse_decimal(cell)
            .map(Value::Num)
            .ok_or_else(|| format!("`{cell}` is not a number")),
        Kind::Time => parse_time(cell)
            .map(Value::Time)
            .ok_or_else(|| format!("`{cell}` is not a time of day (HH:MM)")),
        Kind::Date => Ok(Value::Date(cell.to_string())),
    }
}

fn parse_decimal(s: &str) -> Option<Decimal> {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return None;
    }
    Decimal::from_str(s).ok()
}

/// Reads one relation file into `inst`.
pub fn load_relation(inst: &mut Instance, path: &Path, sig: &RelationSignature) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<&str> = sig.attributes.iter().map(|a| a.name.as_str()).collect();
    if header != expected {
        return Err(Error::SchemaMismatch(format!(
            "{}: header [{}] does not match `{sig}`",
            path.display(),
            header.join(", ")
        )));
    }
    inst.declare(sig.clone());
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::SchemaMismatch(format!("{}: row {row}: {e}", path.display())))?;
        let mut values = Vec::with_capacity(sig.arity());
        for (attr, cell) in sig.attributes.iter().zip(record.iter()) {
            let v = parse_cell(attr.kind, cell).map_err(|message| Error::ValueParse {
                relation: sig.name.clone(),
                row,
                column: attr.name.clone(),
                message,
            })?;
            values.push(v);
        }
        inst.insert(&sig.name, Tuple::new(values));
    }
    Ok(())
}

/// Loads every relation of `schema` from `dir/<name>.csv`.
pub fn load_facts(dir: &Path, schema: &[RelationSignature]) -> Result<Instance> {
    let mut inst = Instance::new();
    for sig in schema {
        let path = relation_path(dir, &sig.name);
        if !path.is_file() {
            return Err(Error::MissingRelation {
                relation: sig.name.clone(),
                path,
            });
        }
        load_relation(&mut inst, &path, sig)?;
    }
    Ok(inst)
}

pub fn write_relation(path: &Path, sig: &RelationSignature, tuples: &std::collections::BTreeSet<Tuple>) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = sig.attributes.iter().map(|a| a.name.as_str()).collect();
    let csv_err = |e: csv::Error| Error::SchemaMismatch(format!("{}: {e}", path.display()));
    writer.write_record(&header).map_err(csv_err)?;
    for t in tuples {
        writer.write_record(t.to_cells()).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| io_err(e.into_error()))?;
    fs::write(path, bytes).map_err(io_err)
}

/// Writes every declared relation of `inst` under `dir`.
pub fn write_facts(inst: &Instance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for sig in inst.signatures() {
        write_relation(&relation_path(dir, &sig.name), sig, inst.tuples(&sig.name))?;
    }
    Ok(())
}
