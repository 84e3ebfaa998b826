//! CSV and JSON import/export. Floats are written with 17 significant
//! digits so that every value round-trips exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::StepEstimate;
use crate::experiments::{CompareRecord, RateRecord};
use crate::limits::LimitBatch;
use crate::model::Sample;

/// Lossless decimal rendering of a float.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(line, format!("{kind:?}")),
    }
}

/// Read a sample from a two-column `x,y` CSV with header.
pub fn read_sample_csv(reader: impl Read) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["x", "y"] {
        return Err(parse_err(1, format!("expected header `x,y`, found `{}`", names.join(","))));
    }
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let x: f64 = rec[0].trim().parse().map_err(|_| parse_err(line, format!("invalid x value `{}`", &rec[0])))?;
        if !x.is_finite() {
            return Err(parse_err(line, format!("non-finite x value `{}`", &rec[0])));
        }
        let y = match rec[1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line, format!("label must be 0 or 1, found `{other}`"))),
        };
        pairs.push((x, y));
    }
    Sample::from_pairs(&pairs)
}

/// Write one `x,y` row per observation.
pub fn write_sample_csv(sample: &Sample, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y"]).map_err(csv_err)?;
    for (x, y) in sample.rows() {
        w.write_record([fmt_float(x), (y as u8).to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_steps_csv(step: &StepEstimate, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["jump_x", "value"]).map_err(csv_err)?;
    for (x, v) in step.jump_xs.iter().zip(&step.values) {
        w.write_record([fmt_float(*x), fmt_float(*v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_steps_csv(reader: impl Read, n: u64) -> Result<StepEstimate> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut jump_xs = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| parse_err(line, format!("invalid number `{s}`")));
        jump_xs.push(parse(&rec[0])?);
        values.push(parse(&rec[1])?);
    }
    Ok(StepEstimate { jump_xs, values, n })
}

/// Sidecar describing how to evaluate a step file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsMeta {
    pub n: u64,
    pub jumps: usize,
    pub extension: String,
}

pub fn steps_meta(step: &StepEstimate) -> StepsMeta {
    StepsMeta {
        n: step.n,
        jumps: step.jump_xs.len(),
        extension: "right-continuous; 0 below the first jump_x; value of the last jump_x at or left of x otherwise"
            .into(),
    }
}

/// `draw` column of a limit batch.
pub fn write_limit_csv(batch: &LimitBatch, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["draw"]).map_err(csv_err)?;
    for d in &batch.draws {
        w.write_record([fmt_float(*d)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Batch metadata without the draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitMeta<'a> {
    pub law_tag: crate::limits::LimitLaw,
    pub grid: &'a crate::limits::PathGrid,
    pub params: &'a BTreeMap<String, f64>,
    pub seed: u64,
    pub replicates: [u64; 2],
}

pub fn limit_meta(batch: &LimitBatch) -> LimitMeta<'_> {
    LimitMeta {
        law_tag: batch.law_tag,
        grid: &batch.grid,
        params: &batch.params,
        seed: batch.seed,
        replicates: [0, batch.draws.len() as u64],
    }
}

pub fn write_rate_csv(records: &[RateRecord], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["gamma", "n", "replicate", "err_pointwise", "err_l1"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            fmt_float(r.gamma),
            r.n.to_string(),
            r.replicate.to_string(),
            fmt_float(r.err_pointwise),
            fmt_float(r.err_l1),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_compare_csv(records: &[CompareRecord], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "n", "gamma", "ks", "draws_finite", "draws_limit"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.kind.name().to_string(),
            r.n.to_string(),
            fmt_float(r.gamma),
            fmt_float(r.ks),
            r.draws_finite.to_string(),
            r.draws_limit.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic CSV writer for a header and rows of preformatted cells.
pub fn write_table(header: &[&str], rows: &[Vec<String>], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of a configuration's canonical text, hex encoded.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Run summary written next to study outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: BTreeMap<String, bool>,
    pub details: serde_json::Value,
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, mut writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}
