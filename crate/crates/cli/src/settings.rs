//! Resolution of option values: built-in defaults, then the config file,
//! then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use crate::UsageError;

pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    /// Reads a TOML table of `key = value` pairs, or the `config` object of
    /// a metadata sidecar written by an earlier run.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            if let Ok(serde_json::Value::Object(meta)) = serde_json::from_str(&text) {
                let config = meta
                    .get("config")
                    .and_then(|c| c.as_object())
                    .ok_or_else(|| UsageError::new("metadata file has no config object"))?;
                for (k, v) in config {
                    let v = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
                    file.insert(k.clone(), v);
                }
            } else {
                let table: toml::Table = text
                    .parse()
                    .map_err(|e| UsageError::new(format!("bad config {}: {e}", path.display())))?;
                for (k, v) in table {
                    let v = match v {
                        toml::Value::String(s) => s,
                        toml::Value::Array(items) => items
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(","),
                        other => other.to_string(),
                    };
                    file.insert(k.replace('-', "_"), v);
                }
            }
        }
        Ok(Settings {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn take<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!(UsageError::new(format!("config key {key}: {e}"))))
            })
            .transpose()
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.take(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.take(key, flag)?;
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = self.take::<PathBuf>(key, flag)?;
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.display().to_string());
        }
        Ok(v)
    }

    /// An on/off pair of flags. Neither flag given defers to the file,
    /// then to off.
    pub fn switch(&mut self, key: &str, on: bool, off: bool) -> Result<bool> {
        let flag = match (on, off) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        self.get(key, flag, false)
    }

    /// A comma-separated list of numbers.
    pub fn list(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<f64>> {
        let raw = self.get(key, flag, default.to_string())?;
        let values = raw
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| anyhow!(UsageError::new(format!("{key}: {s:?}: {e}"))))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            bail!(UsageError::new(format!("{key} is empty")));
        }
        Ok(values)
    }

    /// Fails on config keys that no option consumed, and returns the
    /// resolved configuration.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(key) = self.file.keys().next() {
            bail!(UsageError::new(format!("unknown config key {key:?}")));
        }
        Ok(self.resolved)
    }
}

/// Writes `<out>.meta.json` next to an output file.
pub fn write_sidecar(out: &Path, command: &str, config: &BTreeMap<String, String>) -> Result<()> {
    let meta = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    let mut path = out.as_os_str().to_owned();
    path.push(".meta.json");
    let text = serde_json::to_string_pretty(&meta)? + "\n";
    fs::write(&path, text).with_context(|| format!("cannot write {}", Path::new(&path).display()))?;
    Ok(())
}
