//! Flat `dotted.key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Values are read
//! through typed getters that take a default; every key read is remembered so
//! that [`KeyValueConfig::effective`] can echo the full configuration actually
//! used, and [`KeyValueConfig::check_unused`] can reject misspelt keys.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct KeyValueConfig {
    source: String,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeMap<String, String>>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.').all(|part| {
            !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        })
}

impl KeyValueConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let loc = || format!("{source}:{line}");
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Config {
                location: loc(),
                reason: format!("expected `key = value`, got `{s}`"),
            })?;
            let k = k.trim();
            if !valid_key(k) {
                return Err(Error::Config {
                    location: loc(),
                    reason: format!("invalid key `{k}`"),
                });
            }
            let entry = Entry {
                value: v.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(k.to_string(), entry) {
                return Err(Error::Config {
                    location: loc(),
                    reason: format!("`{k}` already set on line {}", prev.line),
                });
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
            used: RefCell::default(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Sets or replaces a key, as from a command-line override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !valid_key(key) {
            return Err(Error::Config {
                location: "override".into(),
                reason: format!("invalid key `{key}`"),
            });
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn location(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some(e) if e.line > 0 => format!("{}:{} ({key})", self.source, e.line),
            _ => key.to_string(),
        }
    }

    /// Raw string value, marking the key as used.
    pub fn get_str(&self, key: &str) -> Option<String> {
        let v = self.entries.get(key).map(|e| e.value.clone());
        if let Some(v) = &v {
            self.used.borrow_mut().insert(key.to_string(), v.clone());
        }
        v
    }

    /// Parsed value, or `None` when absent.
    pub fn get_opt<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let Some(raw) = self.entries.get(key) else {
            return Ok(None);
        };
        let v = raw.value.parse::<T>().map_err(|e| Error::Config {
            location: self.location(key),
            reason: format!("cannot parse `{}`: {e}", raw.value),
        })?;
        self.used.borrow_mut().insert(key.to_string(), v.to_string());
        Ok(Some(v))
    }

    /// Parsed value or `default`; either way the effective value is recorded.
    pub fn get<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.get_opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.used.borrow_mut().insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.entries.get(key) {
            None => default.to_vec(),
            Some(e) => e
                .value
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Config {
                        location: self.location(key),
                        reason: format!("`{}` is not a number", s.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let txt = v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        self.used.borrow_mut().insert(key.to_string(), txt);
        Ok(v)
    }

    /// A config error located at `key`.
    pub fn error(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::Config {
            location: self.location(key),
            reason: reason.into(),
        }
    }

    /// Fails on the first key that no getter asked for.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains_key(*k)) {
            Some(k) => Err(Error::Config {
                location: self.location(k),
                reason: format!("unknown key `{k}`"),
            }),
            None => Ok(()),
        }
    }

    /// Every key read so far with the value in effect, sorted, one per line.
    pub fn effective(&self) -> String {
        self.used
            .borrow()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes() {
        let c = KeyValueConfig::parse("# c\nident.lambda = 0.5\n\nrun.days=3\n", "t").unwrap();
        assert_eq!(c.get("ident.lambda", 10.0).unwrap(), 0.5);
        assert_eq!(c.get("run.days", 2usize).unwrap(), 3);
        assert_eq!(c.get("ident.alpha", 1e-3).unwrap(), 1e-3);
        c.check_unused().unwrap();
        assert_eq!(c.effective(), "ident.alpha = 0.001\nident.lambda = 0.5\nrun.days = 3\n");
    }

    #[test]
    fn reports_line() {
        let c = KeyValueConfig::parse("a = 1\nb = x\n", "f.cfg").unwrap();
        let e = c.get("b", 1.0).unwrap_err().to_string();
        assert!(e.contains("f.cfg:2"), "{e}");
        assert!(KeyValueConfig::parse("a = 1\na = 2\n", "f").is_err());
        assert!(KeyValueConfig::parse("novalue\n", "f").is_err());
    }

    #[test]
    fn unknown_key() {
        let c = KeyValueConfig::parse("ident.lamda = 1\n", "f").unwrap();
        let _ = c.get("ident.lambda", 1.0).unwrap();
        assert!(c.check_unused().unwrap_err().to_string().contains("ident.lamda"));
    }
}
