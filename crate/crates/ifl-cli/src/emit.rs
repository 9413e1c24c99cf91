//! Result emission: JSON for scalars and reports, CSV for grids and traces.
//! Both carry the resolved run configuration.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

pub enum Output {
    Json(serde_json::Value),
    Csv { header: Vec<String>, rows: Vec<Vec<String>> },
}

impl Output {
    pub fn json(v: impl Serialize) -> Result<Self> {
        Ok(Output::Json(serde_json::to_value(v)?))
    }

    pub fn csv(header: &[&str]) -> Self {
        Output::Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        if let Output::Csv { rows, .. } = self {
            rows.push(row);
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            Output::Json(_) => "json",
            Output::Csv { .. } => "csv",
        }
    }

    pub fn render(&self, cfg: &RunConfig) -> Result<Vec<u8>> {
        match self {
            Output::Json(v) => {
                let mut buf = serde_json::to_vec_pretty(&json!({ "config": cfg, "result": v }))?;
                buf.push(b'\n');
                Ok(buf)
            }
            Output::Csv { header, rows } => {
                let mut buf = Vec::new();
                writeln!(buf, "# config: {}", serde_json::to_string(cfg)?)?;
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(header)?;
                    for r in rows {
                        w.write_record(r)?;
                    }
                    w.flush()?;
                }
                Ok(buf)
            }
        }
    }
}

/// Writes to `<out>/<name>.<ext>` or to stdout; returns the file written.
pub fn emit(out: &Output, cfg: &RunConfig, name: &str) -> Result<Option<PathBuf>> {
    let bytes = out.render(cfg)?;
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("{name}.{}", out.extension()));
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            Ok(Some(path))
        }
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(None)
        }
    }
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}
