//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the long
//! flag names without the leading dashes; a flag given on the command line
//! overrides the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::failure::{CliError, CliResult};

pub const KNOWN_KEYS: &[&str] = &[
    "kernel",
    "truncation",
    "decay",
    "domain",
    "table",
    "order",
    "tol",
    "max-iter",
    "init",
    "seed",
    "out",
    "grid",
    "data",
    "report",
    "model",
    "points",
    "nodes",
    "f-norm",
    "fill-grid",
    "counts",
    "layout",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::input(format!("line {line_no}: expected `key = value`")));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::input(format!("line {line_no}: unknown key `{key}`")));
            }
            if values
                .insert(key.clone(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(CliError::input(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { values })
    }

    /// `flag` if set, otherwise the parsed file value for `key`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::input(format!("config line {line}: bad value for `{key}`: {e}"))),
        }
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }
}
