//! Minimal `key=value` configuration files with optional `[section]` headers.
//!
//! Keys before any section header belong to the `sim` section. Blank lines
//! and lines starting with `#` or `;` are ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] {key}: {msg}")]
    Value { section: String, key: String, msg: String },
    #[error("[{section}] unknown key `{key}`")]
    UnknownKey { section: String, key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const ROOT_SECTION: &str = "sim";

/// Parsed file: section name → ordered key/value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = ROOT_SECTION.to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: i + 1,
                    msg: "unterminated section header".into(),
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            let prev = sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
            if prev.is_some() {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("duplicate key `{}`", k.trim()) });
            }
        }
        Ok(KvFile { sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn section(&self, name: &str) -> Section<'_> {
        static EMPTY: BTreeMap<String, String> = BTreeMap::new();
        Section { name: name.to_string(), map: self.sections.get(name).unwrap_or(&EMPTY) }
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        self.sections.entry(section.to_string()).or_default().insert(key.to_string(), value.to_string());
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(root) = self.sections.get(ROOT_SECTION) {
            for (k, v) in root {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        for (name, map) in &self.sections {
            if name == ROOT_SECTION {
                continue;
            }
            out.push_str(&format!("\n[{name}]\n"));
            for (k, v) in map {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }
}

pub struct Section<'a> {
    name: String,
    map: &'a BTreeMap<String, String>,
}

impl Section<'_> {
    /// Overwrites `slot` when the key is present.
    pub fn read<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.map.get(key) {
            *slot = v.parse().map_err(|e: T::Err| ConfigError::Value {
                section: self.name.clone(),
                key: key.to_string(),
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Fails on any key not in `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        for k in self.map.keys() {
            if !known.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey { section: self.name.clone(), key: k.clone() });
            }
        }
        Ok(())
    }

    pub fn value_error(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Value { section: self.name.clone(), key: key.to_string(), msg: msg.into() }
    }
}

/// Comma-separated list of numbers, e.g. `-30,-15,0,15,30`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}
