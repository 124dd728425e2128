//! Artifact writing: atomic replacement, provenance headers, and the rule
//! that no stage writes over one of its own inputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

/// Provenance recorded at the top of every artifact.
pub fn meta(stage: &str, seed: u64, extra: Value) -> Value {
    let mut m = Map::new();
    m.insert("stage".into(), json!(stage));
    m.insert("seed".into(), json!(seed));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if let Value::Object(extra) = extra {
        m.extend(extra);
    }
    Value::Object(m)
}

/// Best-effort absolute, symlink-free form of a path that may not exist yet.
fn normalize(path: &Path) -> PathBuf {
    if let Ok(p) = path.canonicalize() {
        return p;
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let file = path.file_name().map(|f| f.to_os_string()).unwrap_or_default();
    match parent.canonicalize() {
        Ok(p) => p.join(file),
        Err(_) => std::env::current_dir().unwrap_or_default().join(path),
    }
}

/// Fails when an output path names an input file or another output.
pub fn check_paths(inputs: &[&Path], outputs: &[&Path]) -> CliResult<()> {
    let ins: Vec<PathBuf> = inputs.iter().map(|p| normalize(p)).collect();
    let mut seen: Vec<PathBuf> = Vec::new();
    for out in outputs {
        let n = normalize(out);
        if ins.contains(&n) {
            return Err(CliError::usage(format!(
                "output {} is also an input of this stage",
                out.display()
            )));
        }
        if seen.contains(&n) {
            return Err(CliError::usage(format!(
                "output {} is given more than once",
                out.display()
            )));
        }
        seen.push(n);
    }
    Ok(())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial artifact.
pub fn write_atomic<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut builder = tempfile::Builder::new();
    builder.prefix(".ldat-");
    #[cfg(unix)]
    {
        // temp files default to 0600; artifacts should look like ordinary files
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let tmp = builder.tempfile_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Writes `value` (which must serialize to a JSON object) with an extra
/// `meta` key holding the provenance header.
pub fn write_json<T: Serialize>(path: &Path, value: &T, meta: Value) -> CliResult<()> {
    let mut obj = serde_json::to_value(value).map_err(|e| CliError::Data(e.into()))?;
    if let Value::Object(map) = &mut obj {
        map.insert("meta".into(), meta);
    }
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &obj).map_err(|e| CliError::Data(e.into()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))
    })
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_reader(open(path)?).map_err(|e| {
        CliError::Data(ldat_core::Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    })
}

/// Attaches the file name to library errors that carry no location.
pub fn in_file<T>(path: &Path, r: ldat_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        ldat_core::Error::Parse { line, message } => CliError::Data(ldat_core::Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        }),
        other => CliError::Data(other),
    })
}
