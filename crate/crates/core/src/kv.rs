//! Flat `key = value` text files.
//!
//! One entry per line, `#` starts a comment, keys may carry dotted section
//! prefixes (`features.zeta`). This is the format used for pipeline configs,
//! generator specs, and the machine-readable evaluation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered key-value map parsed from a flat config file.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("expected `key = value`, got {raw:?}"),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parse the value under `key`, if present.
    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key {key}: cannot parse value {v:?}"))),
        }
    }

    /// Comma-separated list value.
    pub fn get_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("key {key}: bad list item {item:?}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_sections() {
        let text = "# pipeline\nfeatures.zeta = 0.35\ntrain.epochs = 100 # inline\n\n";
        let kv = KvFile::parse(text, "test").unwrap();
        assert_eq!(kv.get("features.zeta"), Some("0.35"));
        assert_eq!(kv.get_parsed::<usize>("train.epochs").unwrap(), Some(100));
        assert_eq!(kv.get("missing"), None);
    }

    #[test]
    fn rejects_lines_without_separator() {
        let err = KvFile::parse("zeta 0.35", "cfg.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn list_values() {
        let kv = KvFile::parse("eval.ks = 10, 50,100", "t").unwrap();
        assert_eq!(
            kv.get_list::<usize>("eval.ks").unwrap(),
            Some(vec![10, 50, 100])
        );
    }

    #[test]
    fn round_trips_through_text() {
        let mut kv = KvFile::new();
        kv.set("a.b", 1.5);
        kv.set("a.c", "promote");
        let back = KvFile::parse(&kv.to_text(), "t").unwrap();
        assert_eq!(back.get("a.b"), Some("1.5"));
        assert_eq!(back.get("a.c"), Some("promote"));
    }
}
