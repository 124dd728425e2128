//! Pipeline manifest: a TOML file holding the global seed and one table per
//! stage. Each stage table may set any of that stage's long flag names
//! (with `-` or `_`), including input and output paths. Relative paths are
//! resolved against the manifest's directory.
//!
//! ```toml
//! seed = 7
//!
//! [train-lda]
//! bags = "work/bags.jsonl"
//! k = 4
//! out = "work/lda4.json"
//! ```
//!
//! A value given on the command line always wins over the manifest, which
//! wins over the built-in default.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default)]
pub struct Manifest {
    table: Table,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table: Table = text
            .parse()
            .map_err(|e| CliError::usage(format!("manifest {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { table, base_dir })
    }

    fn global<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        convert(self.table.get(key), key)
    }

    pub fn seed(&self) -> CliResult<Option<u64>> {
        self.global("seed")
    }

    pub fn threads(&self) -> CliResult<Option<usize>> {
        self.global("threads")
    }

    pub fn stage(&self, name: &'static str) -> CliResult<Stage<'_>> {
        let table = match self.table.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                return Err(CliError::usage(format!("manifest entry `{name}` must be a table")))
            }
        };
        Ok(Stage {
            name,
            table,
            base_dir: &self.base_dir,
        })
    }
}

fn convert<T: DeserializeOwned>(value: Option<&Value>, key: &str) -> CliResult<Option<T>> {
    value
        .map(|v| {
            v.clone()
                .try_into()
                .map_err(|e| CliError::usage(format!("manifest key `{key}`: {e}")))
        })
        .transpose()
}

/// Flag resolution for one stage.
pub struct Stage<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    base_dir: &'a Path,
}

impl Stage<'_> {
    fn lookup(&self, key: &str) -> Option<&Value> {
        let table = self.table?;
        table
            .get(key)
            .or_else(|| table.get(&key.replace('-', "_")))
    }

    fn manifest_value<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        convert(self.lookup(key), &format!("{}.{key}", self.name))
    }

    pub fn opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.manifest_value(key),
        }
    }

    pub fn or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn required<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.opt(flag, key)?
            .ok_or_else(|| CliError::usage(format!("{}: missing required --{key}", self.name)))
    }

    pub fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.manifest_value(key)?.unwrap_or(false))
    }

    /// Paths from the command line are used as given; manifest paths are
    /// relative to the manifest.
    pub fn opt_path(&self, flag: Option<PathBuf>, key: &str) -> CliResult<Option<PathBuf>> {
        if flag.is_some() {
            return Ok(flag);
        }
        let path: Option<PathBuf> = self.manifest_value(key)?;
        Ok(path.map(|p| {
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        }))
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        self.opt_path(flag, key)?
            .ok_or_else(|| CliError::usage(format!("{}: missing required --{key}", self.name)))
    }
}
