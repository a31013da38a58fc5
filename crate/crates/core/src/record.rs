//! Plain-text `key = value` records grouped in `[section]`s.
//!
//! Used for counts files and machine-readable outputs. Lines starting with
//! `#` and blank lines are ignored. Keys before the first header belong to
//! the unnamed section `""`.

use std::fmt::{self, Display, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn new(name: &str) -> Self {
        Section { name: name.to_string(), entries: Vec::new() }
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into(), 0));
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v, _)| (k.as_str(), v.as_str()))
    }

    /// Last value given for `key`.
    pub fn value(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.iter().rev().find(|(k, _, _)| k == key).map_or(0, |e| e.2)
    }

    pub fn error(&self, key: &str, message: impl Display) -> Error {
        let place = if self.name.is_empty() { String::new() } else { format!("[{}] ", self.name) };
        Error::Parse { line: self.line_of(key), message: format!("{place}{key}: {message}") }
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.value(key).ok_or_else(|| self.error(key, "missing"))
    }

    fn parse<T: FromStr>(&self, key: &str, v: &str) -> Result<T>
    where
        T::Err: Display,
    {
        v.trim().parse().map_err(|e| self.error(key, format!("`{v}`: {e}")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse(key, self.require(key)?)
    }

    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>> {
        self.value(key).map(|v| self.parse(key, v)).transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.parse(key, self.require(key)?)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.value(key).map(|v| self.parse(key, v)).transpose()
    }

    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>> {
        let v = self.require(key)?;
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|x| self.parse(key, x)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    sections: Vec<Section>,
}

impl Record {
    pub fn new() -> Self {
        Record::default()
    }

    /// The named section, created at the end if absent.
    pub fn section(&mut self, name: &str) -> &mut Section {
        let idx = match self.sections.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                self.sections.push(Section::new(name));
                self.sections.len() - 1
            }
        };
        &mut self.sections[idx]
    }

    pub fn get(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }
}

impl FromStr for Record {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut rec = Record::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                current = name.trim().to_string();
                rec.section(&current);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse { line: line_no, message: "empty key".into() });
            }
            rec.section(&current)
                .entries
                .push((key.to_string(), v.trim().to_string(), line_no));
        }
        Ok(rec)
    }
}

impl Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            if !s.name.is_empty() {
                writeln!(out, "[{}]", s.name)?;
            }
            for (k, v) in s.entries() {
                writeln!(out, "{k} = {v}")?;
            }
        }
        f.write_str(&out)
    }
}

/// Shortest round-trip form; exponent notation outside `[1e-3, 1e6)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-3..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
