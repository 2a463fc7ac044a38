//! Flat `key = value` configuration files.
//!
//! One entry per line; `#` starts a comment, blank lines are ignored and
//! later entries override earlier ones. Keys are checked against the set a
//! caller understands so that typos fail loudly.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, found {line:?}", i + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(KeyValues { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        KeyValues::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.entries
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("{key}: cannot parse item {item:?}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Fails on the first key outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let kv = KeyValues::parse("# comment\nalpha = 2.5\n\nseed=7 # trailing\nalpha=3\ngrid = 1, 2,5\n").unwrap();
        assert_eq!(kv.get::<f64>("alpha").unwrap(), Some(3.0));
        assert_eq!(kv.get_or::<u64>("seed", 0).unwrap(), 7);
        assert_eq!(kv.get_or::<u64>("missing", 9).unwrap(), 9);
        assert_eq!(kv.get_list::<usize>("grid").unwrap(), Some(vec![1, 2, 5]));
        assert!(kv.check_known(&["alpha", "seed", "grid"]).is_ok());
        assert!(matches!(kv.check_known(&["alpha"]), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_malformed() {
        assert!(KeyValues::parse("alpha 2").is_err());
        assert!(KeyValues::parse("=2").is_err());
        let kv = KeyValues::parse("alpha = two").unwrap();
        assert!(kv.get::<f64>("alpha").is_err());
    }
}
