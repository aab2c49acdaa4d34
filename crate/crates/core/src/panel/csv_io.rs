//! Panel CSV (`time,entity,<feature_1>,...,<feature_K>`) and target CSV
//! (`time,entity,forward_return`) reading and writing.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{CrossSection, EntityId, Panel, TargetSeries, TimeId};
use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;

pub fn write_panel_csv<W: Write>(panel: &Panel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "entity".to_string()];
    header.extend(panel.feature_names().iter().cloned());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for s in panel.sections() {
        for (e, row) in s.entities.iter().zip(s.values.iter_rows()) {
            record.clear();
            record.push(s.time.0.clone());
            record.push(e.0.clone());
            record.extend(row.iter().map(f64::to_string));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a panel CSV. Rows may arrive in any order; times are sorted
/// lexicographically and rows within a time keep their file order.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<Panel> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "time" || &header[1] != "entity" {
        return Err(ClaError::Malformed("panel CSV header must be `time,entity,<features...>`".into()));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let k = names.len();
    let mut grouped: BTreeMap<TimeId, (Vec<EntityId>, FeatureMatrix)> = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != k + 2 {
            return Err(ClaError::Malformed(format!("panel CSV record {} has {} fields", line + 2, rec.len())));
        }
        let row = rec.iter().skip(2).map(|v| parse_f64(v, line + 2)).collect::<Result<Vec<f64>>>()?;
        let slot =
            grouped.entry(TimeId(rec[0].to_owned())).or_insert_with(|| (Vec::new(), FeatureMatrix::with_cols(k)));
        slot.0.push(EntityId(rec[1].to_owned()));
        slot.1.push_row(&row)?;
    }
    let sections =
        grouped.into_iter().map(|(time, (entities, values))| CrossSection { time, entities, values }).collect();
    Panel::new(names, sections)
}

pub fn write_targets_csv<W: Write>(targets: &TargetSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "entity", "forward_return"])?;
    for (t, e, v) in targets.iter() {
        w.write_record([t.0.as_str(), e.0.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_targets_csv<R: Read>(reader: R, horizon: usize) -> Result<TargetSeries> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() != 3 || &header[0] != "time" || &header[1] != "entity" || &header[2] != "forward_return" {
        return Err(ClaError::Malformed("target CSV header must be `time,entity,forward_return`".into()));
    }
    let mut out = TargetSeries::new(horizon)?;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = parse_f64(&rec[2], line + 2)?;
        out.insert(TimeId(rec[0].to_owned()), EntityId(rec[1].to_owned()), v)?;
    }
    Ok(out)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| ClaError::Malformed(format!("line {line}: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(ClaError::NonFinite(format!("line {line}")));
    }
    Ok(v)
}
