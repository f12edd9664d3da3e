//! Flat `key = value` configuration files. Lists are comma-separated, `#`
//! starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{LvggmError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<config>"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_named(&std::fs::read_to_string(path)?, path)
    }

    fn parse_named(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| LvggmError::Parse {
            path: PathBuf::from(path),
            line,
            message,
        };
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(err(i + 1, "empty key".into()));
            }
            let value = normalize(v);
            if entries.insert(key.to_string(), value).is_some() {
                return Err(err(i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), normalize(value));
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(LvggmError::InvalidArgument(format!(
                "unknown config key `{k}`; valid keys: {}",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn scalar<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| LvggmError::InvalidArgument(format!("config key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.parse::<T>().map_err(|_| {
                            LvggmError::InvalidArgument(format!("config key `{key}`: cannot parse `{t}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.scalar(key)
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.scalar(key)
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.scalar(key)
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key)
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.list(key)
    }

    /// Sorted `key=value` lines with whitespace and comments removed.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 8 bytes of SHA-256 of [`canonical`](Self::canonical), as 16 hex digits.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&hash[..8]);
        format!("{:016x}", u64::from_be_bytes(word))
    }
}

/// Trims the value and every list item.
fn normalize(v: &str) -> String {
    v.split(',').map(str::trim).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_comments() {
        let c = FlatConfig::parse("# header\np_values = 40, 80 # two\n\nreps=10\nrate = 0.5\n").unwrap();
        assert_eq!(c.get_usize_list("p_values").unwrap(), Some(vec![40, 80]));
        assert_eq!(c.get_usize("reps").unwrap(), Some(10));
        assert_eq!(c.get_f64("rate").unwrap(), Some(0.5));
        assert_eq!(c.get_f64("missing").unwrap(), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = FlatConfig::parse("a = 1\nnot a pair\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = FlatConfig::parse("a = 1\n\na = 2\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("duplicate"), "{e}");
        assert!(FlatConfig::parse(" = 3").is_err());
        let c = FlatConfig::parse("reps = ten").unwrap();
        assert!(c.get_usize("reps").is_err());
    }

    #[test]
    fn digest_ignores_whitespace_order_and_comments() {
        let a = FlatConfig::parse("p_values = 40,80\nreps = 10\n").unwrap();
        let b = FlatConfig::parse("# same\n  reps=10   \n\np_values =40 ,   80\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
        let c = FlatConfig::parse("p_values = 40,80\nreps = 11\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn unknown_keys_list_valid_set() {
        let c = FlatConfig::parse("x = 1").unwrap();
        let e = c.reject_unknown(&["a", "b"]).unwrap_err().to_string();
        assert!(e.contains("`x`") && e.contains("a, b"), "{e}");
    }
}
