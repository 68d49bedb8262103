//! Result tables, provenance blocks, and atomic CSV/JSON writing.
//!
//! Every output embeds enough metadata to rerun the experiment: the
//! resolved config, the master seed, the worker count, the artifact version
//! and the pinned RNG. Nothing time- or host-dependent is written, so a
//! rerun with the same config produces a byte-identical file, not just
//! identical data rows.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Reproducibility block attached to every result.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub artifact_version: String,
    pub rng: String,
    pub master_seed: u64,
    pub workers: usize,
    pub command: String,
    /// Resolved configuration as `key = value` pairs, post-merge.
    pub config: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, master_seed: u64, workers: usize) -> Self {
        Provenance {
            artifact_version: hitrun_core::ARTIFACT_VERSION.to_string(),
            rng: hitrun_core::RNG_NAME.to_string(),
            master_seed,
            workers,
            command: command.to_string(),
            config: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }
}

/// One table cell. Floats print with 17 significant digits so the CSV
/// round-trips `f64` exactly.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(v) => v.clone(),
        }
    }
}

/// Scientific notation with 16 fractional digits = 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A rectangular result with named columns plus scalar summary values.
#[derive(Debug, Clone, Serialize)]
pub struct ResultTable {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Derived scalars (fitted rates, bounds, labels), rendered as comment
    /// lines in CSV and a map in JSON.
    pub scalars: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(provenance: Provenance, columns: &[&str]) -> Self {
        ResultTable {
            provenance,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            scalars: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_scalar(&mut self, key: &str, value: impl std::fmt::Display) {
        self.scalars.push((key.to_string(), value.to_string()));
    }

    pub fn push_scalar_float(&mut self, key: &str, value: f64) {
        self.scalars.push((key.to_string(), format_float(value)));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        out.push_str(&format!("# artifact = {}\n", p.artifact_version));
        out.push_str(&format!("# rng = {}\n", p.rng));
        out.push_str(&format!("# command = {}\n", p.command));
        out.push_str(&format!("# master_seed = {}\n", p.master_seed));
        out.push_str(&format!("# workers = {}\n", p.workers));
        for (k, v) in &p.config {
            out.push_str(&format!("# config.{k} = {v}\n"));
        }
        for (k, v) in &self.scalars {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let scalar_map: serde_json::Map<String, serde_json::Value> = self
            .scalars
            .iter()
            .map(|(k, v)| {
                // keep numeric scalars numeric in JSON when they parse
                let val = v
                    .parse::<f64>()
                    .map(|f| serde_json::json!(f))
                    .unwrap_or_else(|_| serde_json::json!(v));
                (k.clone(), val)
            })
            .collect();
        serde_json::json!({
            "provenance": {
                "artifact_version": self.provenance.artifact_version,
                "rng": self.provenance.rng,
                "command": self.provenance.command,
                "master_seed": self.provenance.master_seed,
                "workers": self.provenance.workers,
                "config": self.provenance.config.iter()
                    .map(|(k, v)| (k.clone(), serde_json::json!(v)))
                    .collect::<serde_json::Map<_, _>>(),
            },
            "columns": self.columns,
            "rows": self.rows,
            "scalars": scalar_map,
        })
    }

    /// Serialize in the chosen format and write atomically: the bytes land
    /// in a sibling temp file first and are renamed over the target, so a
    /// failed run never leaves a partial output.
    pub fn write_atomic(&self, path: &Path, format: OutputFormat) -> std::io::Result<()> {
        let payload = match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("json");
                s.push('\n');
                s
            }
        };
        let tmp = path.with_extension("tmp-write");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(payload.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}
