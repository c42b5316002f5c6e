//! Resolved configuration and results of one run, echoed into every output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Key order is sorted, so every rendering is deterministic.
#[derive(Debug, Clone)]
pub struct Report {
    command: &'static str,
    config: Map<String, Value>,
    results: Map<String, Value>,
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Report {
    pub fn new(command: &'static str) -> Report {
        Report { command, config: Map::new(), results: Map::new() }
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) {
        self.config.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Comment bodies (without the leading `#`) for file headers.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("+ command {}", self.command)];
        lines.extend(self.config.iter().map(|(k, v)| format!("+ config.{k} {}", plain(v))));
        lines.extend(self.results.iter().map(|(k, v)| format!("+ result.{k} {}", plain(v))));
        lines
    }

    /// Header lines with their `#`, one per line.
    pub fn comment_block(&self) -> String {
        self.header_lines().iter().map(|l| format!("#{l}\n")).collect()
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "results": self.results,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("report is valid JSON");
        s.push('\n');
        s
    }

    /// `key: value` lines for the terminal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.results {
            let _ = writeln!(out, "{k}: {}", plain(v));
        }
        out
    }
}

/// Write `content` to `path`, or to `stdout` when there is no path.
pub fn emit(path: Option<&Path>, content: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => stdout.write_all(content.as_bytes()).context("writing to standard output"),
    }
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_json_agree() {
        let mut r = Report::new("solve");
        r.config("q", 0.2);
        r.config("p", 0.6);
        r.config("policy", "mw");
        r.result("avg_aoi", 12.5);
        assert_eq!(
            r.header_lines(),
            vec!["+ command solve", "+ config.p 0.6", "+ config.policy mw", "+ config.q 0.2", "+ result.avg_aoi 12.5"]
        );
        let v = r.to_json_value();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["config"]["policy"], "mw");
        assert_eq!(r.to_text(), "avg_aoi: 12.5\n");
    }

    #[test]
    fn sibling_appends() {
        assert_eq!(sibling(Path::new("out/op.txt"), ".overlay"), PathBuf::from("out/op.txt.overlay"));
    }
}
