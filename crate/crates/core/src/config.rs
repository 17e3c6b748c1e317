//! `key = value` configuration files.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys
//! must be consumed by the caller; leftovers are reported as unknown.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    /// Removes and parses `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("line {line}: cannot parse {key} = {v:?}"))
            }),
        }
    }

    /// Removes and parses a comma-separated list.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => parse_list(&v)
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse list {key} = {v:?}"))),
        }
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "1" | "true" | "yes" => Ok(Some(true)),
                "0" | "false" | "no" => Ok(Some(false)),
                _ => Err(Error::Config(format!("line {line}: {key} must be a boolean, got {v:?}"))),
            },
        }
    }

    /// Fails if any key was not consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config(format!("line {line}: unknown key {k}"))),
        }
    }
}

pub fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, ()> {
    let v = v.trim().trim_start_matches('[').trim_end_matches(']');
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| s.trim().parse().map_err(|_| ())).collect()
}

pub fn format_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
