//! File formats: sensor logs, run configuration, the basis cache and the
//! map, heatmap and run exports.
//!
//! Every text file starts with a `# magslam-<kind> <major>.<minor>` line.
//! Readers accept any minor version of the major they know and reject newer
//! majors. Floats are written in Rust's shortest round-trip form, so a write
//! followed by a read reproduces the values bit for bit.

mod cache;
mod config;
mod export;
mod log;
mod mapstate;

pub use cache::{basis_cache_path, load_basis, load_or_build_basis, save_basis, CACHE_VERSION};
pub use config::{BasisSection, ExportSection, PathsSection, RunConfig, ScenarioSection, SlamSection};
pub use export::{
    export_heatmap, export_map_grid, read_map_grid, read_summary, write_estimates, write_heatmap,
    write_map_grid, Channel, GridPoint, GridSpec, MapGrid, RunStatus, RunSummary,
};
pub use log::{
    read_estimates, read_log, read_truth, truth_path_for, write_log, write_truth, EstimateRow, LogData,
    TruthData,
};
pub use mapstate::{read_map_state, write_map_state};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Major version written by, and accepted by, every text format here.
pub const FORMAT_MAJOR: u32 = 1;
const FORMAT_VERSION: &str = "1.0";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn format_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads and checks the version line; the reader is left at line 2.
fn read_version_line(reader: &mut impl BufRead, path: &Path, kind: &str) -> Result<()> {
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let tag = format!("# magslam-{kind} ");
    let version = first
        .trim_end()
        .strip_prefix(&tag)
        .ok_or_else(|| format_error(path, 1, format!("expected a `{}<version>` line", tag)))?;
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok())
        .ok_or_else(|| format_error(path, 1, format!("malformed version `{version}`")))?;
    if major != FORMAT_MAJOR {
        return Err(Error::Version {
            path: path.display().to_string(),
            found: version.to_string(),
            supported: FORMAT_MAJOR,
        });
    }
    Ok(())
}

fn write_version_line(w: &mut impl Write, path: &Path, kind: &str) -> Result<()> {
    writeln!(w, "# magslam-{kind} {FORMAT_VERSION}").map_err(|e| Error::io(path, e))
}

/// Opens a versioned CSV file and checks its header row.
fn csv_reader(path: &Path, kind: &str, columns: &[&str]) -> Result<csv::Reader<BufReader<File>>> {
    let mut reader = open(path)?;
    read_version_line(&mut reader, path, kind)?;
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = csv.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(columns.iter().copied()) {
        return Err(format_error(
            path,
            2,
            format!("expected columns `{}`, found `{}`", columns.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(csv)
}

fn csv_writer(path: &Path, kind: &str, columns: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = create(path)?;
    write_version_line(&mut out, path, kind)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(columns).map_err(|e| csv_error(path, e))?;
    Ok(csv)
}

/// File line of a CSV record; the version line precedes the CSV data.
fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize + 1)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize + 1);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => format_error(path, line, format!("{kind:?}")),
    }
}

/// Parses every field of a record as `f64`, checking the field count.
fn parse_floats(path: &Path, record: &csv::StringRecord, columns: &[&str]) -> Result<Vec<f64>> {
    let line = record_line(record);
    if record.len() != columns.len() {
        return Err(format_error(
            path,
            line,
            format!("expected {} fields, found {}", columns.len(), record.len()),
        ));
    }
    record
        .iter()
        .zip(columns)
        .map(|(field, name)| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| format_error(path, line, format!("column {name}: cannot parse `{field}` as a number")))
        })
        .collect()
}

fn write_row(csv: &mut csv::Writer<BufWriter<File>>, path: &Path, fields: &[String]) -> Result<()> {
    csv.write_record(fields).map_err(|e| csv_error(path, e))
}

fn finish(csv: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    let mut inner = csv
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
