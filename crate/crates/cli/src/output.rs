use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_DESCRIBE: &str = env!("QUADCAV_GIT_DESCRIBE");

/// Writes files into the output directory and remembers what it wrote.
pub struct Sink<'a> {
    dir: PathBuf,
    command: &'a str,
    config: &'a RunConfig,
    written: Vec<String>,
}

impl<'a> Sink<'a> {
    pub fn new(dir: &Path, command: &'a str, config: &'a RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Csv) -> Result<(), CliError> {
        let mut out = String::new();
        let _ = writeln!(out, "# quadcav {VERSION} ({GIT_DESCRIBE})");
        let _ = writeln!(out, "# command: {}", self.command);
        for (k, v) in &table.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "# config: {}", serde_json::to_string(self.config).expect("config serializes"));
        out.push_str(&table.header.join(","));
        out.push('\n');
        for row in &table.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.put(name, &out)
    }

    /// JSON document carrying the command, the effective config and `results`.
    pub fn json(&mut self, name: &str, results: &impl Serialize) -> Result<(), CliError> {
        let doc = json!({
            "command": self.command,
            "version": VERSION,
            "git": GIT_DESCRIBE,
            "config": self.config,
            "results": results,
        });
        self.put(name, &(serde_json::to_string_pretty(&doc).expect("results serialize") + "\n"))
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.put(name, text)
    }

    /// Closes the run with `manifest.json` listing every file written.
    pub fn finish(mut self, wall_time: f64, extra: Value) -> Result<Vec<String>, CliError> {
        let doc = json!({
            "command": self.command,
            "version": VERSION,
            "git": GIT_DESCRIBE,
            "config": self.config,
            "wall_time_s": wall_time,
            "files": self.written,
            "summary": extra,
        });
        self.put("manifest.json", &(serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"))?;
        Ok(self.written)
    }
}

/// Column table with free-form metadata; cells are preformatted.
#[derive(Debug, Default)]
pub struct Csv {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12.247448713915889, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::NAN), "nan");
    }
}
