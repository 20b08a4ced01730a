//! Plain-text `key = value` configuration files. Blank lines and text after
//! `#` are ignored; later keys override earlier ones.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| UsageError(format!("config line {}: expected key = value", n + 1)))?;
            let key = k.trim().replace('-', "_");
            if key.is_empty() {
                return Err(UsageError(format!("config line {}: empty key", n + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| UsageError(format!("config key `{key}`: bad value `{v}`: {e}"))))
            .transpose()
    }

    /// `flag` if given, else the file value, else `default`.
    pub fn resolve<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, UsageError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Keys present in the file that are not in `known`.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.values.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect()
    }
}
