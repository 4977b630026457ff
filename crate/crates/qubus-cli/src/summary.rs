use std::fmt::Display;
use std::io;
use std::path::Path;

use qubus_core::dynamics::{fmt_f64, Quality};

/// Ordered `key = value` lines.
#[derive(Clone, Debug, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.set(key, fmt_f64(v));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn quality(&mut self, prefix: &str, q: &Quality) {
        self.num(format!("{prefix}trace_drift"), q.trace_drift);
        self.num(format!("{prefix}hermiticity_error"), q.hermiticity);
        self.num(format!("{prefix}min_eigenvalue"), q.min_eigenvalue);
        self.set(format!("{prefix}cptp_ok"), q.ok());
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}
