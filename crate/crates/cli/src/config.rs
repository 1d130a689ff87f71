//! Settings shared by the flags and the optional `--config` file.
//!
//! A config file is either a flat TOML table whose keys mirror the long
//! flag names (with `_` for `-`), or a `manifest.json` written by an
//! earlier run, whose `config` object has the same shape. Flags always win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gafs_core::Layout;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutArg {
    /// One sample per line.
    Rows,
    /// One feature per line.
    Columns,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Rows => Layout::SamplesAsRows,
            LayoutArg::Columns => Layout::SamplesAsColumns,
        }
    }
}

/// A scalar or a list; grid axes accept both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: FileConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let bad = |e: &dyn std::fmt::Display| {
            CliError::Config(format!(
                "{}: {}",
                path.display(),
                e.to_string().replace('\n', " ")
            ))
        };
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str::<ManifestConfig>(&text)
                .map_err(|e| bad(&e))?
                .config
        } else {
            toml::from_str::<FileConfig>(&text).map_err(|e| bad(&e))?
        };
        // Relative paths in a config file are relative to the file itself.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data,
            &mut cfg.labels,
            &mut cfg.ranking,
            &mut cfg.split,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Absolute form of `p`, so manifests stay valid from any directory.
pub fn absolute(p: PathBuf) -> CliResult<PathBuf> {
    std::path::absolute(&p).map_err(CliError::io(p))
}

/// Flag value if given, else the config-file value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required argument --{flag}")))
}

/// A single value where the config file may hold a one-element list.
pub fn single<T: Clone>(v: Option<OneOrMany<T>>, key: &str) -> CliResult<Option<T>> {
    match v {
        None => Ok(None),
        Some(OneOrMany::One(x)) => Ok(Some(x)),
        Some(OneOrMany::Many(xs)) if xs.len() == 1 => Ok(Some(xs[0].clone())),
        Some(_) => Err(CliError::Config(format!(
            "`{key}` must be a single value for this command"
        ))),
    }
}
