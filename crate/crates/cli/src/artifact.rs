//! CSV artifacts with a `#` metadata header, plus JSON summaries.
//!
//! ```text
//! # mflab artifact
//! # kind: correlate
//! # version: 0.1.0
//! # threads: 8
//! # config: {...}
//! n_1,M,re,im,abs
//! ...
//! ```
//!
//! Wall time goes to the summary only, so identical runs give identical CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MAGIC: &str = "# mflab artifact";

/// 17 significant digits; round-trips every `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Artifact {
    pub kind: &'static str,
    pub extra_meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Map<String, Value>,
}

impl Artifact {
    pub fn new(kind: &'static str, header: &[&str]) -> Self {
        Self {
            kind,
            extra_meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: Map::new(),
        }
    }

    pub fn row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.extra_meta.push((key.to_string(), value.into()));
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn csv(&self, config: &ExperimentConfig, threads: usize) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "# kind: {}", self.kind).unwrap();
        writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "# threads: {threads}").unwrap();
        for (k, v) in &self.extra_meta {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        writeln!(out, "# config: {}", config.to_json()).unwrap();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header).map_err(|e| CliError::Internal(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Internal(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
        drop(w);
        Ok(out)
    }

    pub fn summary_json(&self, config: &ExperimentConfig, threads: usize, wall_time: f64) -> Value {
        let mut m = Map::new();
        m.insert("kind".into(), json!(self.kind));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("threads".into(), json!(threads));
        m.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
        for (k, v) in &self.summary {
            m.insert(k.clone(), v.clone());
        }
        m.insert("wall_time".into(), json!(wall_time));
        Value::Object(m)
    }
}

/// Where the CSV and the summary go.
pub struct Sinks {
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Sinks {
    pub fn write(&self, csv: &[u8], summary: &Value) -> Result<(), CliError> {
        let summary_text = serde_json::to_string_pretty(summary).expect("summary serializes");
        match &self.out {
            Some(p) => write_file(p, csv)?,
            None => std::io::stdout()
                .write_all(csv)
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
        }
        let summary_path = self
            .summary
            .clone()
            .or_else(|| self.out.as_ref().map(|p| p.with_extension("json")));
        match summary_path {
            Some(p) => write_file(&p, summary_text.as_bytes()),
            None => {
                eprintln!("{summary_text}");
                Ok(())
            }
        }
    }
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(p, bytes).map_err(|e| CliError::io(p, e))
}

/// A parsed artifact.
pub struct Parsed {
    pub path: PathBuf,
    pub kind: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Parsed {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |why: &str| CliError::Parse(format!("{}: {why}", path.display()));
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("not an mflab artifact (missing header)"));
        }
        let mut meta = Vec::new();
        let mut body_start = MAGIC.len() + 1;
        for line in lines {
            let Some(rest) = line.strip_prefix("# ") else { break };
            let (k, v) = rest.split_once(": ").ok_or_else(|| bad(&format!("malformed metadata line {line:?}")))?;
            meta.push((k.to_string(), v.to_string()));
            body_start += line.len() + 1;
        }
        let kind = meta
            .iter()
            .find(|(k, _)| k == "kind")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| bad("no kind"))?;
        let mut reader = csv::Reader::from_reader(&text.as_bytes()[body_start.min(text.len())..]);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| bad(&e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        Ok(Self {
            path: path.to_path_buf(),
            kind,
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Parse(format!("{}: no column `{name}`", self.path.display())))
    }

    pub fn number(&self, row: &[String], col: usize) -> Result<f64, CliError> {
        row[col]
            .parse()
            .map_err(|_| CliError::Parse(format!("{}: `{}` is not a number", self.path.display(), row[col])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 2.9109555048341345, 1.0 / 3.0, -1e-300, 12345.678] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
        }
    }
}
