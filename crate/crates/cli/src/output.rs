//! JSON summaries and CSV detail files.
//!
//! JSON keys are sorted and every float is written with 17 significant
//! digits, so identical runs produce identical bytes. Non-finite floats
//! become `null`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;

/// 17 significant digits; enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).context("serializing summary")?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push_str(": ");
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Output directory plus the enabled formats.
pub struct Sink {
    pub dir: PathBuf,
    formats: Vec<Format>,
}

impl Sink {
    pub fn new(dir: PathBuf, formats: &[Format]) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Sink {
            dir,
            formats: formats.to_vec(),
        })
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<Option<PathBuf>> {
        if !self.formats.contains(&Format::Json) {
            return Ok(None);
        }
        let path = self.dir.join(format!("{name}.json"));
        fs::write(&path, to_json(value)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(Some(path))
    }

    /// Writes `rows` under `header`; cells are preformatted strings.
    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<Option<PathBuf>> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(None);
        }
        let path = self.dir.join(format!("{name}.csv"));
        write_csv(&path, header, rows)?;
        Ok(Some(path))
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `prefix0, prefix1, …` for vector-valued columns.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Prints `line` to stdout, ignoring a closed pipe.
pub fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}
