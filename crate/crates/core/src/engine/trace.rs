//! Per-step interpretability records and the memory-triangle export.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::panel::TimeId;

/// One entry of the recall mixture. The base learner has id `"base"`,
/// memories `"m<id>"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTrace {
    pub id: String,
    pub memory_id: Option<u64>,
    pub created_at: Option<TimeId>,
    /// Time at which the participant's parameters were trained.
    pub trained_at: TimeId,
    /// Absent when the participant was the only one and needed no score.
    pub dissimilarity: Option<f64>,
    pub weight: f64,
    /// False for alive memories left out by a top-k cutoff.
    pub recalled: bool,
    pub forecast_mean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl ForecastSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { n, mean, min, max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: TimeId,
    pub step: usize,
    /// Base learner error that became observable at this step.
    pub base_error: Option<f64>,
    /// Threshold the remember cue was checked against; null means infinite.
    pub j_crit: Option<f64>,
    pub remember_fired: bool,
    pub new_memory: Option<u64>,
    pub evicted: Option<u64>,
    pub participants: Vec<ParticipantTrace>,
    pub forecast_summary: ForecastSummary,
}

impl StepTrace {
    /// Participant with the largest weight (first one on ties).
    pub fn max_weight(&self) -> Option<&ParticipantTrace> {
        let mut best: Option<&ParticipantTrace> = None;
        for p in &self.participants {
            if best.is_none_or(|b| p.weight > b.weight) {
                best = Some(p);
            }
        }
        best
    }

    pub fn weight_sum(&self) -> f64 {
        self.participants.iter().map(|p| p.weight).sum()
    }
}

pub fn write_trace_jsonl<W: Write>(traces: &[StepTrace], mut writer: W) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace_jsonl<R: BufRead>(reader: R) -> Result<Vec<StepTrace>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: StepTrace =
            serde_json::from_str(&line).map_err(|e| ClaError::Malformed(format!("trace line {}: {e}", i + 1)))?;
        out.push(t);
    }
    Ok(out)
}

/// One alive memory at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleRow {
    pub step: TimeId,
    pub memory_id: u64,
    pub created_at: TimeId,
    pub weight: f64,
}

/// Every alive memory at every step, in trace order.
pub fn triangle_rows(traces: &[StepTrace]) -> Vec<TriangleRow> {
    let mut rows = Vec::new();
    for t in traces {
        for p in &t.participants {
            if let (Some(id), Some(created)) = (p.memory_id, &p.created_at) {
                rows.push(TriangleRow {
                    step: t.t.clone(),
                    memory_id: id,
                    created_at: created.clone(),
                    weight: p.weight,
                });
            }
        }
    }
    rows
}

pub fn write_triangle_csv<W: Write>(rows: &[TriangleRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "memory_id", "created_at", "weight"])?;
    for r in rows {
        w.write_record([r.step.0.clone(), r.memory_id.to_string(), r.created_at.0.clone(), r.weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_triangle_csv<R: std::io::Read>(reader: R) -> Result<Vec<TriangleRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
