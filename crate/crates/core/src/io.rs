//! On-disk formats: per-trial logs, aggregates and the sweep manifest.
//!
//! All files are comma-separated with a header row and LF line endings.
//! Reals are written with 17 significant digits in C `%.17g` style, which
//! reproduces the binary value exactly when read back.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{AggregateRow, Metric, RunLog};

pub const TRIAL_HEADER: [&str; 3] = ["k", "metric", "value"];
pub const AGGREGATE_HEADER: [&str; 5] = ["k", "metric", "mean", "std", "n_trials"];
pub const MANIFEST_HEADER: [&str; 4] = ["variant", "label", "digest", "aggregate"];

pub const CONFIG_FILE: &str = "config.txt";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";

pub fn trial_file_name(seed: u64) -> String {
    format!("trial_{seed}.csv")
}

/// `%.17g` formatting.
pub fn format_g17(v: f64) -> String {
    const PRECISION: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let mantissa = strip_fraction_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (PRECISION - 1 - exp) as usize, v);
        strip_fraction_zeros(&fixed).to_string()
    }
}

fn strip_fraction_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_header(rdr: &mut csv::Reader<fs::File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(schema(
            path,
            format!("header `{}` is not `{}`", header.iter().collect::<Vec<_>>().join(","), expected.join(",")),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| schema(path, "short row"))?;
    raw.parse()
        .map_err(|_| schema(path, format!("cannot parse `{raw}` on line {}", line_of(rec))))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn write_trial_csv(log: &RunLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRIAL_HEADER)?;
    for (k, metric, value) in log.rows() {
        w.write_record([k.to_string(), metric.to_string(), format_g17(value)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a trial log; seed and digest are supplied by the caller.
pub fn read_trial_csv(path: &Path, seed: u64, digest: &str) -> Result<RunLog> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &TRIAL_HEADER)?;
    let mut log = RunLog::new(seed, digest);
    for rec in rdr.records() {
        let rec = rec?;
        let k: usize = field(&rec, 0, path)?;
        let metric: Metric = field(&rec, 1, path)?;
        let value: f64 = field(&rec, 2, path)?;
        log.record(k, metric, value)
            .map_err(|e| schema(path, format!("line {}: {e}", line_of(&rec))))?;
    }
    Ok(log)
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.metric.to_string(),
            format_g17(r.mean),
            format_g17(r.std),
            r.n_trials.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &AGGREGATE_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(AggregateRow {
                k: field(&rec, 0, path)?,
                metric: field(&rec, 1, path)?,
                mean: field(&rec, 2, path)?,
                std: field(&rec, 3, path)?,
                n_trials: field(&rec, 4, path)?,
            })
        })
        .collect()
}

/// One sweep variant; `aggregate` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub variant: String,
    pub label: String,
    pub digest: String,
    pub aggregate: PathBuf,
}

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(MANIFEST_HEADER)?;
    for r in rows {
        w.write_record([
            r.variant.as_str(),
            r.label.as_str(),
            r.digest.as_str(),
            &r.aggregate.to_string_lossy(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &MANIFEST_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ManifestRow {
                variant: field(&rec, 0, path)?,
                label: field(&rec, 1, path)?,
                digest: field(&rec, 2, path)?,
                aggregate: field(&rec, 3, path)?,
            })
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `trial_<seed>.csv` files in `dir`, sorted by seed.
pub fn trial_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(seed) = name
            .to_str()
            .and_then(|n| n.strip_prefix("trial_"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<u64>().ok())
        else {
            continue;
        };
        out.push((seed, entry.path()));
    }
    out.sort();
    Ok(out)
}
