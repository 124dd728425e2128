//! Reading and writing the jsonl/CSV artifacts exchanged between stages.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use ldat_core::corpus::{self, BagOfSounds, FeatureDocument, FeatureFormat};
use ldat_core::domains::DomainAssignment;
use ldat_core::io::{read_jsonl, write_jsonl};
use ldat_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::output::{in_file, open, write_atomic};

/// Frame labels of one document: `{"id": ..., "labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub labels: Vec<usize>,
    /// Generating domain, when known (synthetic data only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<usize>,
}

#[derive(Deserialize)]
struct IdRecord {
    id: String,
}

#[derive(Deserialize)]
struct GroupRecord {
    id: String,
    #[serde(default)]
    group: Option<String>,
}

pub fn feature_format(path: &Path, flag: Option<FeatureFormat>) -> FeatureFormat {
    flag.unwrap_or_else(|| FeatureFormat::from_path(path))
}

pub fn load_features(path: &Path, format: FeatureFormat) -> CliResult<Vec<FeatureDocument>> {
    if !path.exists() {
        return Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let docs = in_file(path, corpus::load_features(path, format))?;
    log::info!("read {} feature documents from {}", docs.len(), path.display());
    Ok(docs)
}

pub fn write_features(
    path: &Path,
    format: FeatureFormat,
    meta: &Value,
    docs: &[FeatureDocument],
) -> CliResult<()> {
    write_atomic(path, |w| match format {
        FeatureFormat::Jsonl => Ok(corpus::write_features_jsonl(w, Some(meta), docs)?),
        FeatureFormat::Csv => {
            writeln!(w, "# {meta}").map_err(|e| CliError::io(path, e))?;
            Ok(corpus::write_features_csv(w, docs)?)
        }
    })
}

pub fn read_bags(path: &Path) -> CliResult<Vec<BagOfSounds>> {
    in_file(path, corpus::read_bags(open(path)?))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    Ok(in_file(path, read_jsonl(open(path)?))?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

pub fn read_assignments(path: &Path) -> CliResult<Vec<DomainAssignment>> {
    let records: Vec<DomainAssignment> = read_records(path)?;
    let mut seen = HashSet::new();
    for a in &records {
        if !seen.insert(a.doc_id.as_str()) {
            return Err(Error::DuplicateId(a.doc_id.clone()).into());
        }
        in_file(path, a.validate())?;
    }
    if let Some(first) = records.first() {
        let k = first.num_domains();
        if let Some(bad) = records.iter().find(|a| a.num_domains() != k) {
            return Err(Error::DimensionMismatch {
                context: format!("{}: theta of `{}`", path.display(), bad.doc_id),
                expected: k,
                found: bad.num_domains(),
            }
            .into());
        }
    }
    Ok(records)
}

pub fn read_labels(path: &Path) -> CliResult<HashMap<String, Vec<usize>>> {
    let mut out = HashMap::new();
    for r in read_records::<LabelRecord>(path)? {
        if out.insert(r.id.clone(), r.labels).is_some() {
            return Err(Error::DuplicateId(r.id).into());
        }
    }
    Ok(out)
}

pub fn read_ids(path: &Path) -> CliResult<HashSet<String>> {
    Ok(read_records::<IdRecord>(path)?
        .into_iter()
        .map(|r| r.id)
        .collect())
}

/// `id → group` from any jsonl whose records carry `id` and `group`.
pub fn read_groups(path: &Path) -> CliResult<HashMap<String, String>> {
    let mut out = HashMap::new();
    for r in read_records::<GroupRecord>(path)? {
        let group = r.group.ok_or_else(|| {
            CliError::Data(Error::InvalidArgument(format!(
                "{}: document `{}` has no group",
                path.display(),
                r.id
            )))
        })?;
        out.insert(r.id, group);
    }
    Ok(out)
}

pub fn write_records<T: Serialize>(path: &Path, meta: &Value, records: &[T]) -> CliResult<()> {
    write_atomic(path, |w| Ok(write_jsonl(w, Some(meta), records)?))
}
