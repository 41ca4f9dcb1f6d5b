//! Flat `key = value` configuration with optional `[command]` sections.
//!
//! Keys before the first section apply to every command; keys inside a
//! section apply only to the command of that name. Command-line flags
//! override the file, and the file overrides built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// A known key and its default (`None` when it has no default).
pub type KeySpec = (&'static str, Option<&'static str>);

pub fn parse_ini(text: &str, command: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("config line {}: expected key = value", n + 1)));
        };
        if section.as_deref().is_none_or(|s| s == command) {
            out.insert(normalize(k), v.trim().to_string());
        }
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Resolved settings of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(
        command: &str,
        keys: &[KeySpec],
        config_file: Option<&Path>,
        flags: Vec<(&str, String)>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = keys
            .iter()
            .filter_map(|(k, d)| d.map(|d| (k.to_string(), d.to_string())))
            .collect();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_ini(&text, command)? {
                if !keys.iter().any(|(known, _)| *known == k) {
                    return Err(CliError::Config(format!("unknown config key {k:?} for {command}")));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            values.insert(k.to_string(), v);
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Config(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("invalid value {v:?} for {key}")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key).map(|_| self.get(key)).transpose()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// Comma-separated list of values.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("invalid list entry {s:?} for {key}")))
                })
                .collect(),
        }
    }

    pub fn to_ini(&self) -> String {
        let mut out = format!("[{}]\n", self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_ini())?;
        Ok(())
    }
}
