//! Plain-text key-value experiment configuration.
//!
//! Format: one `section.key = value` per line, `#` starts a comment, blank
//! lines ignored. Dotted keys keep the file diffable and the whole file is
//! hashed into reports for provenance.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parsed key-value configuration plus the raw text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    raw: String,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<KvConfig> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(KvConfig {
            entries,
            raw: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<KvConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KvConfig::parse(&text)
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key {key:?}")))
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key {key:?}: bad float {v:?}"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key {key:?}: bad integer {v:?}"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key {key:?}: bad integer {v:?}"))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "key {key:?}: expected true or false, got {v:?}"
            ))),
        }
    }

    /// All `(key, value)` pairs whose key starts with `prefix`, in sorted key
    /// order.
    pub fn with_prefix(&self, prefix: &str) -> Vec<(&str, &str)> {
        self.entries
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }
}

/// Hex SHA-256 of configuration text; reports echo this so a run can be
/// matched to the exact file that produced it.
pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Parses a dash-separated width list like `64-64-128`.
pub fn parse_widths(text: &str) -> Result<Vec<usize>> {
    let widths: Vec<usize> = text
        .split('-')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad width {part:?} in {text:?}")))
        })
        .collect::<Result<_>>()?;
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::Config(format!("widths must be positive in {text:?}")));
    }
    Ok(widths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_blanks() {
        let cfg = KvConfig::parse(
            "# experiment\n\ntrain.learning_rate = 0.02\nroster.anchor1 = 32 # narrow\n",
        )
        .unwrap();
        assert_eq!(cfg.get("train.learning_rate"), Some("0.02"));
        assert_eq!(cfg.get("roster.anchor1"), Some("32"));
        assert_eq!(cfg.get_f64("train.learning_rate", 0.0).unwrap(), 0.02);
        assert_eq!(cfg.get_usize("missing", 7).unwrap(), 7);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvConfig::parse("no equals sign").is_err());
        assert!(KvConfig::parse("= value").is_err());
        assert!(KvConfig::parse("a = 1\na = 2").is_err());
        let cfg = KvConfig::parse("flag = maybe").unwrap();
        assert!(cfg.get_bool("flag", false).is_err());
    }

    #[test]
    fn prefix_listing_is_sorted() {
        let cfg = KvConfig::parse("roster.dnn2 = 4-4\nroster.dnn1 = 2-2\nother = x").unwrap();
        let dnns = cfg.with_prefix("roster.dnn");
        assert_eq!(dnns, vec![("roster.dnn1", "2-2"), ("roster.dnn2", "4-4")]);
    }

    #[test]
    fn hashing_is_stable_and_sensitive() {
        let a = config_hash("a = 1\n");
        assert_eq!(a, config_hash("a = 1\n"));
        assert_ne!(a, config_hash("a = 2\n"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn width_lists() {
        assert_eq!(parse_widths("64-64-128").unwrap(), vec![64, 64, 128]);
        assert_eq!(parse_widths("32").unwrap(), vec![32]);
        assert!(parse_widths("a-b").is_err());
        assert!(parse_widths("64-0").is_err());
    }
}
