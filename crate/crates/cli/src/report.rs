//! Run reports: ordered `key = value` lines with dotted section prefixes.

use std::fmt::{self, Display};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn section<'a, V: Display + 'a>(&mut self, prefix: &str, items: impl IntoIterator<Item = (&'a str, V)>) {
        for (k, v) in items {
            self.push(format!("{prefix}.{k}"), v);
        }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// Parses text produced by `Display`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Option<Self> {
        let mut r = Report::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(" = ")?;
            r.push(k.trim(), v.trim());
        }
        Some(r)
    }

    /// The report minus every `timing.*` entry, which varies run to run.
    pub fn without_timing(&self) -> Report {
        Report {
            entries: self.entries.iter().filter(|(k, _)| !k.starts_with("timing.")).cloned().collect(),
        }
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Comma-joined list.
pub fn list<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
