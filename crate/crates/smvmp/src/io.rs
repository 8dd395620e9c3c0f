//! Catalog, scenario and trace files, plus CSV output helpers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use smvmp_core::{Catalog, Datacenter, Trace, TraceRecord};

use crate::error::{CliError, Result};

const TRACE_HEADER: [&str; 5] = ["epoch", "vm_id", "cpu_pct", "mem_pct", "event"];

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let catalog: Catalog = read_json(path)?;
    catalog.validate()?;
    Ok(catalog)
}

pub fn load_scenario(path: &Path) -> Result<Datacenter> {
    read_json(path)
}

/// Reads a trace CSV with columns `epoch,vm_id,cpu_pct,mem_pct,event`.
/// Errors carry the 1-based line number of the offending row.
pub fn load_trace(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_error = |line: u64, message: String| CliError::Parse { path: path.into(), line, message };
    let headers = reader.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_error(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let record: TraceRecord = row.deserialize(Some(&headers)).map_err(|e| parse_error(line, csv_message(&e)))?;
        for (name, v) in [("cpu_pct", record.cpu_pct), ("mem_pct", record.mem_pct)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(parse_error(line, format!("{name} {v} outside [0, 100]")));
            }
        }
        records.push(record);
    }
    Ok(Trace::new(records)?)
}

fn csv_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    }
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = CsvOut::create(path, &TRACE_HEADER)?;
    for r in trace.records() {
        w.row(&r)?;
    }
    w.finish()
}

/// A CSV file written row by row through serde.
pub struct CsvOut {
    path: std::path::PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    /// Creates the file and writes `header`.
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
        writer.write_record(header).map_err(|e| csv_io(path, e))?;
        Ok(CsvOut { path: path.into(), writer })
    }

    pub fn row<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row).map_err(|e| csv_io(&self.path, e))
    }

    pub fn finish(self) -> Result<()> {
        let path = self.path;
        let mut inner = self.writer.into_inner().map_err(|e| CliError::io(&path, e.into_error()))?;
        inner.flush().map_err(|e| CliError::io(&path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}
