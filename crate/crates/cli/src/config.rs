//! Flat `key = value` configuration files and their merge with flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key a configuration file may set. Hyphens are read as underscores.
pub const KNOWN_KEYS: &[&str] = &[
    "x",
    "y",
    "labels",
    "alpha",
    "boot",
    "trunc",
    "max_rounds",
    "seed",
    "method",
    "windows",
    "out",
    "format",
    "threads",
    "runs",
    "design",
    "beta",
    "delta",
    "delta0",
    "gamma",
    "p",
    "n",
    "m",
    "decay",
];

fn canonical(key: &str) -> String {
    let key = key.trim().to_ascii_lowercase().replace('-', "_");
    match key.as_str() {
        "n_boot" => "boot".into(),
        "trunc_s" => "trunc".into(),
        _ => key,
    }
}

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = canonical(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "config line {}: unknown key '{}'",
                    i + 1,
                    key
                )));
            }
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::config(format!(
                    "config line {}: key '{key}' set twice",
                    i + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, otherwise the parsed file value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::config(format!("invalid value '{v}' for '{key}'")))
            })
            .transpose()
    }

    pub fn pick_string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.raw(key).map(str::to_string))
    }
}

/// Comma separated list; empty items are rejected.
pub fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<T>()
                .map_err(|_| CliError::config(format!("invalid {what} '{item}'")))
        })
        .collect()
}

pub fn parse_switch(text: &str) -> Result<Vec<bool>, CliError> {
    text.split(',')
        .map(|v| match v.trim().to_ascii_lowercase().as_str() {
            "on" | "true" | "yes" | "1" => Ok(true),
            "off" | "false" | "no" | "0" => Ok(false),
            "both" => Err(CliError::config("use 'on,off' rather than 'both'".into())),
            other => Err(CliError::config(format!("invalid decay value '{other}'"))),
        })
        .collect()
}
