//! Plain-text checkpoint documents.
//!
//! ```text
//! mpteleop-checkpoint 1
//! [actor]
//! widths 6 3 6
//! w0 -1.2345678901234567e-1 ...
//! ```
//!
//! A document is a version line followed by named sections; each section
//! line is a key and whitespace-separated values. Floats are written with
//! 17 significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

pub const MAGIC: &str = "mpteleop-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint document (missing `{MAGIC}` header)")]
    MissingHeader,
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    Version { found: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("section [{section}] is missing key `{key}`")]
    MissingKey { section: String, key: String },
    #[error("section [{section}] key `{key}`: {msg}")]
    BadValue { section: String, key: String, msg: String },
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, Vec<String>)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), entries: Vec::new() }
    }

    pub fn push_floats(&mut self, key: &str, values: &[f64]) {
        self.entries.push((key.to_string(), values.iter().map(|v| format_f64(*v)).collect()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push_floats(key, &[value]);
    }

    pub fn push_usizes(&mut self, key: &str, values: &[usize]) {
        self.entries.push((key.to_string(), values.iter().map(|v| v.to_string()).collect()));
    }

    pub fn push_str(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), vec![value.to_string()]));
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    fn raw(&self, key: &str) -> Result<&[String], CheckpointError> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| CheckpointError::MissingKey { section: self.name.clone(), key: key.to_string() })
    }

    fn parse_all<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CheckpointError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)?
            .iter()
            .map(|s| {
                s.parse::<T>().map_err(|e| CheckpointError::BadValue {
                    section: self.name.clone(),
                    key: key.to_string(),
                    msg: format!("`{s}`: {e}"),
                })
            })
            .collect()
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>, CheckpointError> {
        self.parse_all(key)
    }

    pub fn floats_len(&self, key: &str, len: usize) -> Result<Vec<f64>, CheckpointError> {
        let v = self.floats(key)?;
        if v.len() != len {
            return Err(self.bad(key, format!("expected {len} values, found {}", v.len())));
        }
        Ok(v)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CheckpointError> {
        Ok(self.floats_len(key, 1)?[0])
    }

    pub fn usizes(&self, key: &str) -> Result<Vec<usize>, CheckpointError> {
        self.parse_all(key)
    }

    pub fn usize(&self, key: &str) -> Result<usize, CheckpointError> {
        let v = self.usizes(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(self.bad(key, format!("expected one value, found {}", v.len()))),
        }
    }

    pub fn str(&self, key: &str) -> Result<&str, CheckpointError> {
        match self.raw(key)? {
            [s] => Ok(s),
            other => Err(self.bad(key, format!("expected one value, found {}", other.len()))),
        }
    }

    pub fn bad(&self, key: &str, msg: String) -> CheckpointError {
        CheckpointError::BadValue { section: self.name.clone(), key: key.to_string(), msg }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn section(&self, name: &str) -> Result<&Section, CheckpointError> {
        self.sections.iter().find(|s| s.name == name).ok_or_else(|| CheckpointError::MissingSection(name.into()))
    }

    /// Sections named `prefix` or `prefix.<anything>`, in document order.
    pub fn sections_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| {
            s.name == prefix || (s.name.starts_with(prefix) && s.name[prefix.len()..].starts_with('.'))
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for s in &self.sections {
            let _ = writeln!(out, "[{}]", s.name);
            for (k, vals) in &s.entries {
                out.push_str(k);
                for v in vals {
                    out.push(' ');
                    out.push_str(v);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let (_, header) = lines.next().ok_or(CheckpointError::MissingHeader)?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MAGIC) {
            return Err(CheckpointError::MissingHeader);
        }
        let version = head.next().unwrap_or("");
        if version != VERSION.to_string() {
            return Err(CheckpointError::Version { found: version.to_string() });
        }
        let mut doc = Checkpoint::new();
        for (idx, line) in lines {
            let line = line.trim();
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| CheckpointError::Parse {
                    line: idx + 1,
                    msg: "unterminated section header".into(),
                })?;
                doc.push(Section::new(name.trim()));
                continue;
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| CheckpointError::Parse { line: idx + 1, msg: "entry outside of a section".into() })?;
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default().to_string();
            section.entries.push((key, parts.map(str::to_string).collect()));
        }
        Ok(doc)
    }
}
