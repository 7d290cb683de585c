//! Result tables and their CSV / JSON-lines serialisation.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::scenario::OutputFormat;

pub const COLUMNS: [&str; 7] = ["eps_rad_s", "domega_rad_s", "seed", "fidelity", "infidelity", "t_fw_s", "wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub eps_rad_s: f64,
    pub domega_rad_s: f64,
    pub seed: u64,
    pub fidelity: f64,
    pub infidelity: f64,
    /// Evaluation time of the run (t_G for pulse-free runs).
    pub t_fw_s: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Used in the file name, e.g. `pulsed` or `correlated-2`.
    pub name: String,
    /// Ordered metadata; the scenario echo lives under `scenario`.
    pub meta: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), meta: BTreeMap::new(), rows: Vec::new() }
    }

    pub fn set_meta(&mut self, key: &str, value: impl Serialize) {
        self.meta.insert(key.to_string(), serde_json::to_value(value).expect("metadata serialises"));
    }

    /// Orders rows by (ε, δΩ, seed).
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.eps_rad_s
                .total_cmp(&b.eps_rad_s)
                .then(a.domega_rad_s.total_cmp(&b.domega_rad_s))
                .then(a.seed.cmp(&b.seed))
        });
    }

    /// Distinct (ε, δΩ) grid points in row order.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&(r.eps_rad_s, r.domega_rad_s)) {
                out.push((r.eps_rad_s, r.domega_rad_s));
            }
        }
        out
    }

    /// Mean fidelity over realizations at each grid point, in grid order.
    pub fn mean_fidelity(&self) -> Vec<((f64, f64), f64)> {
        self.grid()
            .into_iter()
            .map(|p| {
                let f: Vec<f64> =
                    self.rows.iter().filter(|r| (r.eps_rad_s, r.domega_rad_s) == p).map(|r| r.fidelity).collect();
                (p, f.iter().sum::<f64>() / f.len() as f64)
            })
            .collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// File name `<stem>_<table>.<ext>` inside `dir`.
pub fn output_path(dir: &Path, stem: &str, table: &ResultTable, format: OutputFormat) -> PathBuf {
    dir.join(format!("{stem}_{}.{}", table.name, format.extension()))
}

/// Writes `table` to `path`. An empty table is rejected before anything
/// touches the filesystem.
pub fn emit_results(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::invalid(format!("table `{}` has no rows; nothing written", table.name)));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => {
            for (k, v) in &table.meta {
                writeln!(out, "# {k}: {v}").map_err(io_err(path))?;
            }
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &table.rows {
                w.serialize(r).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(io_err(path))?;
        }
        OutputFormat::Jsonl => {
            let head = serde_json::json!({ "table": table.name, "metadata": table.meta });
            writeln!(out, "{head}").map_err(io_err(path))?;
            for r in &table.rows {
                let line = serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?;
                writeln!(out, "{line}").map_err(io_err(path))?;
            }
        }
    }
    out.flush().map_err(io_err(path))
}

/// Reads a table written by [`emit_results`].
pub fn read_results(path: &Path, format: OutputFormat) -> Result<ResultTable> {
    let file = File::open(path).map_err(io_err(path))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut table = ResultTable::new(name);
    match format {
        OutputFormat::Csv => {
            let mut reader = BufReader::new(file);
            let mut body = String::new();
            let mut line = String::new();
            loop {
                line.clear();
                if reader.read_line(&mut line).map_err(io_err(path))? == 0 {
                    break;
                }
                match line.strip_prefix("# ") {
                    Some(meta) => {
                        let (k, v) = meta
                            .trim_end()
                            .split_once(": ")
                            .ok_or_else(|| Error::Parse(format!("{}: malformed header `{}`", path.display(), line.trim_end())))?;
                        let v = serde_json::from_str(v).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                        table.meta.insert(k.to_string(), v);
                    }
                    None => body.push_str(&line),
                }
            }
            let mut r = csv::Reader::from_reader(body.as_bytes());
            let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
            if header != COLUMNS {
                return Err(Error::Parse(format!("{}: unexpected columns {header:?}", path.display())));
            }
            for row in r.deserialize() {
                table.rows.push(row.map_err(|e| csv_err(path, e))?);
            }
        }
        OutputFormat::Jsonl => {
            let parse = |s: &str| serde_json::from_str::<serde_json::Value>(s).map_err(|e| Error::Parse(format!("{}: {e}", path.display())));
            let mut lines = BufReader::new(file).lines();
            let head = parse(&lines.next().ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?.map_err(io_err(path))?)?;
            if let Some(n) = head.get("table").and_then(|n| n.as_str()) {
                table.name = n.to_string();
            }
            if let Some(serde_json::Value::Object(m)) = head.get("metadata") {
                table.meta = m.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            }
            for line in lines {
                let line = line.map_err(io_err(path))?;
                let row: Row = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                table.rows.push(row);
            }
        }
    }
    Ok(table)
}
