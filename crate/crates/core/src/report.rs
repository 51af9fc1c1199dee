//! Results tables in markdown, CSV and JSON, with per-class and ROC sidecars.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::persist::write_atomic;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolCell {
    pub val: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub label: String,
    /// One cell per pool, in `ResultsTable::pools` order.
    pub cells: Vec<PoolCell>,
    #[serde(default)]
    pub details: Vec<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub title: String,
    pub pools: Vec<String>,
    pub rows: Vec<ResultRow>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidParam(format!("unknown report format {other:?}"))),
        }
    }
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"))
}

fn fmt_csv(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl ResultsTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "### {}\n", self.title);
        }
        out.push_str("| Model |");
        for p in &self.pools {
            let _ = write!(out, " {p} Val | {p} Test |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(2 * self.pools.len()));
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "| {} |", row.label.replace('|', "\\|"));
            for c in &row.cells {
                let _ = write!(out, " {} | {} |", fmt4(c.val), fmt4(c.test));
            }
            out.push('\n');
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                let _ = writeln!(out, "- {n}");
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["model".to_owned()];
        for p in &self.pools {
            header.push(format!("{p}_val"));
            header.push(format!("{p}_test"));
        }
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.label.clone()];
            for c in &row.cells {
                rec.push(fmt_csv(c.val));
                rec.push(fmt_csv(c.test));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        finish_csv(w)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Long-format per-class recall: one line per (row, eval set, class).
    pub fn per_class_csv(&self) -> Result<Option<String>> {
        if self.rows.iter().all(|r| r.details.is_empty()) {
            return Ok(None);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "eval_set", "class", "accuracy", "auc", "support"])
            .map_err(csv_err)?;
        for row in &self.rows {
            for d in &row.details {
                for (c, name) in d.class_names.iter().enumerate() {
                    let support: usize = d.confusion[c].iter().sum();
                    w.write_record([
                        row.label.as_str(),
                        d.eval_set_name.as_str(),
                        name.as_str(),
                        &fmt_csv(d.per_class_accuracy[c]),
                        &fmt_csv(d.auc[c]),
                        &support.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        finish_csv(w).map(Some)
    }

    /// ROC points for every defined one-vs-rest curve.
    pub fn roc_csv(&self) -> Result<Option<String>> {
        if self.rows.iter().all(|r| r.details.is_empty()) {
            return Ok(None);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "eval_set", "class", "point", "fpr", "tpr"])
            .map_err(csv_err)?;
        for row in &self.rows {
            for d in &row.details {
                for (c, curve) in d.roc.iter().enumerate() {
                    let Some(curve) = curve else { continue };
                    for (i, p) in curve.iter().enumerate() {
                        w.write_record([
                            row.label.as_str(),
                            d.eval_set_name.as_str(),
                            d.class_names[c].as_str(),
                            &i.to_string(),
                            &p.fpr.to_string(),
                            &p.tpr.to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
        }
        finish_csv(w).map(Some)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Markdown => Ok(self.to_markdown()),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Writes the table to `path`, plus `<stem>.per_class.csv` and
/// `<stem>.roc.csv` when rows carry evaluation details. Returns every path
/// written.
pub fn emit_report(table: &ResultsTable, format: ReportFormat, path: &Path) -> Result<Vec<PathBuf>> {
    write_atomic(path, table.render(format)?.as_bytes())?;
    let mut written = vec![path.to_path_buf()];
    if let Some(text) = table.per_class_csv()? {
        let p = sidecar(path, "per_class");
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    if let Some(text) = table.roc_csv()? {
        let p = sidecar(path, "roc");
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}
