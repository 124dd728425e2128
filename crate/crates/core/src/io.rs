//! JSON-lines helpers shared by every artifact format.
//!
//! A jsonl artifact may begin with a header object of the form
//! `{"meta": {...}}` carrying provenance (stage name, seed). Readers skip any
//! line whose object has a `meta` key and no `id` key.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Reads records from jsonl, skipping blank lines and header lines. Each
/// record is paired with its 1-based line number for error reporting.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if is_header(&value) {
            continue;
        }
        let record = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push((lineno, record));
    }
    Ok(out)
}

/// Returns the `meta` object of the first header line, if any.
pub fn read_jsonl_meta<R: BufRead>(reader: R) -> Result<Option<Value>> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => return Ok(None),
        };
        if is_header(&value) {
            return Ok(value.get("meta").cloned());
        }
        return Ok(None);
    }
    Ok(None)
}

fn is_header(value: &Value) -> bool {
    value
        .as_object()
        .map(|o| o.contains_key("meta") && !o.contains_key("id"))
        .unwrap_or(false)
}

pub fn write_jsonl<'a, T, W, I>(mut writer: W, meta: Option<&Value>, records: I) -> Result<()>
where
    T: Serialize + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(meta) = meta {
        serde_json::to_writer(&mut writer, &serde_json::json!({ "meta": meta }))?;
        writer.write_all(b"\n")?;
    }
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// serde adapter for log-probability matrices: −∞ is written as `null`
/// since JSON has no infinity literal.
pub mod log_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<f64>>> = m
            .iter()
            .map(|r| r.iter().map(|&v| v.is_finite().then_some(v)).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let rows: Vec<Vec<Option<f64>>> = Vec::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect())
            .collect())
    }
}
