use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::Value;

use super::{validate_bags, validate_features, BagOfSounds, FeatureDocument, SymbolDocument};
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    /// `{"id":…, "group":…, "frames":[[…],…]}` per line.
    Jsonl,
    /// `id,group,frame_index,f0,…,f{D-1}`, one row per frame.
    Csv,
}

impl FeatureFormat {
    /// Guesses the format from a file extension (`.csv` → CSV, else jsonl).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Jsonl,
        }
    }
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(FeatureFormat::Jsonl),
            "csv" => Ok(FeatureFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature format `{other}`"
            ))),
        }
    }
}

/// Loads and validates feature documents in file order.
pub fn load_features(path: &Path, format: FeatureFormat) -> Result<Vec<FeatureDocument>> {
    let file = File::open(path)?;
    match format {
        FeatureFormat::Jsonl => read_features_jsonl(BufReader::new(file)),
        FeatureFormat::Csv => read_features_csv(file),
    }
}

#[derive(Deserialize)]
struct RawFeatureRecord {
    id: String,
    #[serde(default)]
    group: Option<String>,
    frames: Vec<Vec<Option<f64>>>,
}

pub fn read_features_jsonl<R: BufRead>(reader: R) -> Result<Vec<FeatureDocument>> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cleaned = nonfinite_literals_to_null(&line);
        let value: Value = serde_json::from_str(&cleaned).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if value.get("meta").is_some() && value.get("id").is_none() {
            continue;
        }
        let raw: RawFeatureRecord = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let mut frames = Vec::with_capacity(raw.frames.len());
        for (t, frame) in raw.frames.into_iter().enumerate() {
            let mut out = Vec::with_capacity(frame.len());
            for v in frame {
                match v {
                    Some(x) => out.push(x),
                    None => {
                        return Err(Error::NonFinite {
                            doc_id: raw.id,
                            frame: t,
                        })
                    }
                }
            }
            frames.push(out);
        }
        docs.push(FeatureDocument::new(raw.id, raw.group, frames));
    }
    validate_features(&docs)?;
    Ok(docs)
}

/// Rewrites bare `NaN`, `Infinity` and `-Infinity` tokens (as emitted by
/// common non-strict JSON writers) to `null`, leaving string contents alone.
fn nonfinite_literals_to_null(line: &str) -> String {
    let bytes = line.as_bytes();
    let mut out = String::with_capacity(line.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_string = false;
            }
        } else if c == b'"' {
            in_string = true;
        } else {
            let rest = &line[i..];
            let token = ["-Infinity", "Infinity", "NaN"]
                .into_iter()
                .find(|t| rest.starts_with(t));
            if let Some(token) = token {
                out.push_str("null");
                i += token.len();
                continue;
            }
        }
        // bytes are copied verbatim; multi-byte chars only occur inside strings
        let ch_len = line[i..].chars().next().map(char::len_utf8).unwrap_or(1);
        out.push_str(&line[i..i + ch_len]);
        i += ch_len;
    }
    out
}

/// Reads `id,group,frame_index,f0,f1,...` rows; a document's frames must be
/// consecutive and in order. Lines starting with `#` are ignored.
pub fn read_features_csv<R: Read>(reader: R) -> Result<Vec<FeatureDocument>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    // a corpus with no documents is written with no feature columns
    if headers.len() < 3
        || &headers[0] != "id"
        || &headers[1] != "group"
        || &headers[2] != "frame_index"
    {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `id,group,frame_index,f0,...`".into(),
        });
    }
    let dim = headers.len() - 3;
    let mut docs: Vec<FeatureDocument> = Vec::new();
    let mut records = rdr.records().peekable();
    if dim == 0 && records.peek().is_some() {
        return Err(Error::Parse {
            line: 1,
            message: "header has no feature columns".into(),
        });
    }
    let mut finished: HashSet<String> = HashSet::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |message: String| Error::Parse { line, message };
        let id = &record[0];
        let group = (!record[1].is_empty()).then(|| record[1].to_string());
        let frame_index: usize = record[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("frame_index: {e}")))?;
        let mut frame = Vec::with_capacity(dim);
        for field in record.iter().skip(3) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("value `{field}`: {e}")))?;
            frame.push(v);
        }
        let continues = docs.last().map(|d| d.id == id).unwrap_or(false);
        if !continues {
            if let Some(prev) = docs.last() {
                finished.insert(prev.id.clone());
            }
            if finished.contains(id) {
                return Err(Error::DuplicateId(id.to_string()));
            }
            docs.push(FeatureDocument::new(id, group, Vec::new()));
        }
        let doc = docs.last_mut().expect("document pushed above");
        if frame_index != doc.frames.len() {
            return Err(parse_err(format!(
                "document `{id}`: expected frame_index {}, found {frame_index}",
                doc.frames.len()
            )));
        }
        doc.frames.push(frame);
    }
    validate_features(&docs)?;
    Ok(docs)
}

pub fn write_features_jsonl<W: Write>(
    writer: W,
    meta: Option<&Value>,
    docs: &[FeatureDocument],
) -> Result<()> {
    write_jsonl(writer, meta, docs)
}

pub fn write_features_csv<W: Write>(writer: W, docs: &[FeatureDocument]) -> Result<()> {
    let dim = validate_features(docs)?.unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "group".into(), "frame_index".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    wtr.write_record(&header)?;
    for doc in docs {
        for (t, frame) in doc.frames.iter().enumerate() {
            let mut row = Vec::with_capacity(dim + 3);
            row.push(doc.id.clone());
            row.push(doc.group_label.clone().unwrap_or_default());
            row.push(t.to_string());
            row.extend(frame.iter().map(|v| format!("{v:?}")));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_symbols<R: BufRead>(reader: R) -> Result<Vec<SymbolDocument>> {
    let docs: Vec<SymbolDocument> = read_jsonl(reader)?.into_iter().map(|(_, d)| d).collect();
    let mut seen = HashSet::new();
    for d in &docs {
        if !seen.insert(d.id.as_str()) {
            return Err(Error::DuplicateId(d.id.clone()));
        }
    }
    Ok(docs)
}

pub fn write_symbols<W: Write>(
    writer: W,
    meta: Option<&Value>,
    docs: &[SymbolDocument],
) -> Result<()> {
    write_jsonl(writer, meta, docs)
}

pub fn read_bags<R: BufRead>(reader: R) -> Result<Vec<BagOfSounds>> {
    let bags: Vec<BagOfSounds> = read_jsonl(reader)?.into_iter().map(|(_, b)| b).collect();
    validate_bags(&bags)?;
    Ok(bags)
}

pub fn write_bags<W: Write>(writer: W, meta: Option<&Value>, bags: &[BagOfSounds]) -> Result<()> {
    write_jsonl(writer, meta, bags)
}
