//! `key = value` files with `#` comments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::{ParseError, ParseErrors};

pub(crate) struct Fields<'a> {
    entries: BTreeMap<&'a str, (usize, &'a str)>,
    used: BTreeSet<&'a str>,
    pub errors: Vec<ParseError>,
}

impl<'a> Fields<'a> {
    pub fn parse(text: &'a str) -> Self {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                errors.push(ParseError::new(
                    line,
                    format!("expected `key = value`, found `{content}`"),
                ));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                errors.push(ParseError::new(line, "empty key"));
                continue;
            }
            if let Some((first, _)) = entries.get(key) {
                errors.push(ParseError::new(
                    line,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
                continue;
            }
            entries.insert(key, (line, value));
        }
        Fields {
            entries,
            used: BTreeSet::new(),
            errors,
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.0)
    }

    fn raw(&mut self, key: &'a str) -> Option<(usize, &'a str)> {
        let e = self.entries.get(key).copied();
        if e.is_some() {
            self.used.insert(key);
        }
        e
    }

    /// Value of an optional key converted with `conv`; conversion failures
    /// are recorded and reported as absent.
    pub fn opt<T>(&mut self, key: &'a str, conv: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let (line, value) = self.raw(key)?;
        match conv(value) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.errors
                    .push(ParseError::new(line, format!("`{key}`: {msg}")));
                None
            }
        }
    }

    pub fn req<T>(&mut self, key: &'a str, conv: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        if !self.has(key) {
            self.errors
                .push(ParseError::new(0, format!("missing required key `{key}`")));
            return None;
        }
        self.opt(key, conv)
    }

    /// Reads the file named by `key`, relative to `base`.
    pub fn file(&mut self, key: &'a str, base: Option<&Path>) -> Option<(PathBuf, String)> {
        let (line, value) = self.raw(key)?;
        let Some(base) = base else {
            self.errors.push(ParseError::new(
                line,
                format!("`{key}` names a file but no base directory is available"),
            ));
            return None;
        };
        let path = base.join(value);
        match std::fs::read_to_string(&path) {
            Ok(text) => Some((path, text)),
            Err(e) => {
                self.errors.push(ParseError::new(
                    line,
                    format!("`{key}`: cannot read {}: {e}", path.display()),
                ));
                None
            }
        }
    }

    pub fn error(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ParseError::new(line, message));
    }

    /// Fails with every recorded error plus one per key never asked for.
    pub fn finish(mut self) -> Result<(), ParseErrors> {
        for (key, (line, _)) in &self.entries {
            if !self.used.contains(key) {
                self.errors
                    .push(ParseError::new(*line, format!("unknown key `{key}`")));
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            self.errors.sort_by_key(|e| e.line);
            Err(ParseErrors(self.errors))
        }
    }
}

pub(crate) fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

pub(crate) fn count(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a non-negative integer", s.trim()))
}

/// Numbers separated by commas and/or whitespace.
pub(crate) fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(number)
        .collect()
}

pub(crate) fn counts(s: &str) -> Result<Vec<usize>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(count)
        .collect()
}

pub(crate) fn fixed<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v = numbers(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} numbers, found {}", v.len()))
}

/// `a b c; a b c; ...` triples.
pub(crate) fn triples(s: &str) -> Result<Vec<[f64; 3]>, String> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(fixed::<3>)
        .collect()
}
