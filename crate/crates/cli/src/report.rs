//! Summary of a finished run directory: per-cell metrics aggregated across
//! seeds and memory-triangle CSVs rebuilt from the traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cla_core::backtest::MetricsReport;
use cla_core::engine::{read_trace_jsonl, triangle_rows, write_triangle_csv};
use serde::{Deserialize, Serialize};

use crate::{CELL_ARTIFACTS, CONFIG_FILE};

/// Columns of the summary table, in order.
pub const METRICS: [&str; 9] = ["tr", "sd", "sharpe", "sharpe_p", "rr", "rr_sd", "info_ratio", "ir_t", "ir_p"];

fn metric(m: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "tr" => Some(m.tr),
        "sd" => Some(m.sd),
        "sharpe" => m.sharpe,
        "sharpe_p" => m.sharpe_p,
        "rr" => Some(m.rr),
        "rr_sd" => Some(m.rr_sd),
        "info_ratio" => m.info_ratio,
        "ir_t" => m.ir_t,
        "ir_p" => m.ir_p,
        _ => None,
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub seeds: Vec<u64>,
    /// Headline values: per-metric median across seeds.
    pub median: BTreeMap<String, Option<f64>>,
    pub mean: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cells: Vec<CellSummary>,
    /// Triangle CSVs written, one per (seed, cell).
    pub triangles: Vec<PathBuf>,
}

fn seed_dirs(run: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut seeds = Vec::new();
    for entry in fs::read_dir(run).with_context(|| format!("reading run directory {}", run.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        if let Some(seed) = entry.file_name().to_str().and_then(|s| s.parse::<u64>().ok()) {
            seeds.push((seed, entry.path()));
        }
    }
    seeds.sort();
    Ok(seeds)
}

fn subdirs(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(out)
}

/// Reads a run directory and writes `report/summary.{csv,json}` and
/// `report/triangle/<seed>/<cell>.csv`. Fails listing every missing artifact.
pub fn cmd_report(run: &Path) -> Result<Report> {
    let seeds = seed_dirs(run)?;
    let mut missing = Vec::new();
    if !run.join(CONFIG_FILE).is_file() {
        missing.push(run.join(CONFIG_FILE));
    }
    if seeds.is_empty() {
        bail!("run directory {} contains no seed directories", run.display());
    }
    let mut cells = BTreeSet::new();
    for (_, dir) in &seeds {
        cells.extend(subdirs(dir)?);
    }
    if cells.is_empty() {
        bail!("run directory {} contains no cell directories", run.display());
    }
    for (_, dir) in &seeds {
        for cell in &cells {
            for a in CELL_ARTIFACTS {
                let p = dir.join(cell).join(a);
                if !p.is_file() {
                    missing.push(p);
                }
            }
        }
    }
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        bail!("missing artifacts: {}", list.join(", "));
    }

    let out = run.join("report");
    let mut triangles = Vec::new();
    let mut summaries = Vec::new();
    for cell in &cells {
        let mut per_metric: BTreeMap<&str, Vec<f64>> = METRICS.iter().map(|m| (*m, Vec::new())).collect();
        for (seed, dir) in &seeds {
            let cell_dir = dir.join(cell);
            let path = cell_dir.join("metrics.json");
            let text = fs::read_to_string(&path)?;
            let m: MetricsReport =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            for (name, values) in per_metric.iter_mut() {
                values.extend(metric(&m, name));
            }
            let path = cell_dir.join("trace.jsonl");
            let traces = read_trace_jsonl(BufReader::new(File::open(&path)?))
                .with_context(|| format!("parsing {}", path.display()))?;
            let tri_dir = out.join("triangle").join(seed.to_string());
            fs::create_dir_all(&tri_dir)?;
            let tri = tri_dir.join(format!("{cell}.csv"));
            let mut w = BufWriter::new(File::create(&tri)?);
            write_triangle_csv(&triangle_rows(&traces), &mut w)?;
            w.flush()?;
            triangles.push(tri);
        }
        summaries.push(CellSummary {
            cell: cell.clone(),
            seeds: seeds.iter().map(|(s, _)| *s).collect(),
            median: per_metric.iter().map(|(k, v)| (k.to_string(), median(v))).collect(),
            mean: per_metric.iter().map(|(k, v)| (k.to_string(), mean(v))).collect(),
        });
    }

    let report = Report { cells: summaries, triangles };
    let mut w = BufWriter::new(File::create(out.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(out.join("summary.csv"))?);
    w.write_all(summary_csv(&report).as_bytes())?;
    w.flush()?;
    Ok(report)
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Median table as CSV: `cell,seeds,<metrics...>`.
pub fn summary_csv(report: &Report) -> String {
    let mut s = format!("cell,seeds,{}\n", METRICS.join(","));
    for c in &report.cells {
        let vals: Vec<String> = METRICS.iter().map(|m| fmt_cell(c.median[*m])).collect();
        s.push_str(&format!("{},{},{}\n", c.cell, c.seeds.len(), vals.join(",")));
    }
    s
}

/// Fixed-width median table for the terminal.
pub fn summary_table(report: &Report) -> String {
    let mut s = format!("{:<16}", "cell");
    for m in METRICS {
        s.push_str(&format!("{m:>11}"));
    }
    s.push('\n');
    for c in &report.cells {
        s.push_str(&format!("{:<16}", c.cell));
        for m in METRICS {
            match c.median[m] {
                Some(v) => s.push_str(&format!("{v:>11.4}")),
                None => s.push_str(&format!("{:>11}", "-")),
            }
        }
        s.push('\n');
    }
    s
}
