//! `key<TAB>value` records, one per line, in insertion order.

use super::atomic::{read_text, write_atomic};
use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) -> Result<()> {
        let key = key.into();
        let value = value.to_string();
        if key.is_empty() || key.contains(['\t', '\n', '\r']) {
            return Err(Error::precondition(format!("invalid manifest key {key:?}")));
        }
        if value.contains(['\t', '\n', '\r']) {
            return Err(Error::precondition(format!("manifest value for '{key}' contains a tab or newline")));
        }
        if self.get(&key).is_some() {
            return Err(Error::precondition(format!("duplicate manifest key '{key}'")));
        }
        self.entries.push((key, value));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str, path: &Path) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(path, format!("missing manifest key '{key}'")))
    }

    pub fn parse<T: FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let v = self.require(key, path)?;
        v.parse()
            .map_err(|_| Error::format(path, format!("key '{key}': cannot parse '{v}'")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn encode(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('\t');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn decode(text: &str, path: &Path) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, format!("line {}: missing tab separator", n + 1)))?;
            if k.is_empty() || v.contains('\t') {
                return Err(Error::format(path, format!("line {}: expected exactly key<TAB>value", n + 1)));
            }
            if !seen.insert(k.to_string()) {
                return Err(Error::format(path, format!("line {}: duplicate key '{k}'", n + 1)));
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    write_atomic(path, m.encode().as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Manifest::decode(&read_text(path)?, path)
}
