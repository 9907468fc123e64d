use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use super::{csv_reader, csv_writer, finish, format_error, parse_floats, record_line, write_row};
use crate::error::Result;
use crate::geom::{Pose, Quaternion, TileId};
use crate::record::StepRecord;
use crate::sim::TruthSample;

pub(super) const LOG_COLUMNS: [&str; 12] = [
    "t_s", "dt_s", "dp_x", "dp_y", "dp_z", "dq_w", "dq_x", "dq_y", "dq_z", "mag_x", "mag_y", "mag_z",
];

const TRUTH_EXTRA: [&str; 7] = ["true_px", "true_py", "true_pz", "true_qw", "true_qx", "true_qy", "true_qz"];

pub(super) const ESTIMATE_COLUMNS: [&str; 13] = [
    "t_s", "px", "py", "pz", "qw", "qx", "qy", "qz", "tile_a", "tile_b", "tile_k", "ess", "resampled",
];

/// Rows whose `dq` norm is off by more than this are renormalised and
/// counted; beyond [`DQ_REJECT`] the row is an error.
const DQ_WARN: f64 = 1e-12;
const DQ_REJECT: f64 = 1e-6;

/// A parsed sensor log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogData {
    pub records: Vec<StepRecord>,
    /// Rows whose `dq` had to be renormalised.
    pub renormalised: usize,
}

/// A parsed ground-truth sidecar: the log plus the true pose of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthData {
    pub log: LogData,
    pub truth: Vec<TruthSample>,
}

/// One row of an estimate file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRow {
    pub t: f64,
    pub pose: Pose,
    pub tile: TileId,
    pub ess: f64,
    pub resampled: bool,
}

/// Sidecar path for a log: `walk.csv` gets `walk.truth.csv`.
pub fn truth_path_for(log: &Path) -> PathBuf {
    let stem = log.file_stem().unwrap_or_default().to_string_lossy();
    log.with_file_name(format!("{stem}.truth.csv"))
}

fn log_fields(r: &StepRecord) -> Vec<String> {
    let q = r.dq;
    [r.t, r.dt, r.dp.x, r.dp.y, r.dp.z, q.w, q.x, q.y, q.z, r.mag.x, r.mag.y, r.mag.z]
        .iter()
        .map(f64::to_string)
        .collect()
}

pub fn write_log(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut csv = csv_writer(path, "log", &LOG_COLUMNS)?;
    for r in records {
        write_row(&mut csv, path, &log_fields(r))?;
    }
    finish(csv, path)
}

pub fn write_truth(path: &Path, records: &[StepRecord], truth: &[TruthSample]) -> Result<()> {
    let columns: Vec<&str> = LOG_COLUMNS.iter().chain(&TRUTH_EXTRA).copied().collect();
    let mut csv = csv_writer(path, "truth", &columns)?;
    for (r, s) in records.iter().zip(truth) {
        let (p, q) = (s.pose.position, s.pose.orientation);
        let mut fields = log_fields(r);
        fields.extend([p.x, p.y, p.z, q.w, q.x, q.y, q.z].iter().map(f64::to_string));
        write_row(&mut csv, path, &fields)?;
    }
    finish(csv, path)
}

/// `q` if it is unit up to rounding, renormalised if slightly off, `None`
/// if it is not a rotation.
fn unit(q: Quaternion) -> Option<Quaternion> {
    let deviation = (q.norm() - 1.0).abs();
    if !(deviation <= DQ_REJECT) {
        None
    } else if deviation > DQ_WARN {
        Some(q.normalized())
    } else {
        Some(q)
    }
}

/// Checks one log row and appends it.
fn push_record(path: &Path, line: usize, v: &[f64], data: &mut LogData) -> Result<()> {
    let raw = Quaternion::new(v[5], v[6], v[7], v[8]);
    let dq = unit(raw).ok_or_else(|| format_error(path, line, format!("dq has norm {}, not unit", raw.norm())))?;
    data.renormalised += (dq != raw) as usize;
    let record = StepRecord {
        t: v[0],
        dt: v[1],
        dp: Vector3::new(v[2], v[3], v[4]),
        dq,
        mag: Vector3::new(v[9], v[10], v[11]),
    };
    record.validate().map_err(|e| format_error(path, line, e.to_string()))?;
    if let Some(prev) = data.records.last() {
        if !(record.t > prev.t) {
            return Err(format_error(
                path,
                line,
                format!("time {} does not increase past {}", record.t, prev.t),
            ));
        }
    }
    data.records.push(record);
    Ok(())
}

/// Reads a sensor log, validating every row and the time order.
pub fn read_log(path: &Path) -> Result<LogData> {
    let mut csv = csv_reader(path, "log", &LOG_COLUMNS)?;
    let mut data = LogData {
        records: Vec::new(),
        renormalised: 0,
    };
    for row in csv.records() {
        let row = row.map_err(|e| super::csv_error(path, e))?;
        let v = parse_floats(path, &row, &LOG_COLUMNS)?;
        push_record(path, record_line(&row), &v, &mut data)?;
    }
    Ok(data)
}

/// Reads a ground-truth sidecar.
pub fn read_truth(path: &Path) -> Result<TruthData> {
    let columns: Vec<&str> = LOG_COLUMNS.iter().chain(&TRUTH_EXTRA).copied().collect();
    let mut csv = csv_reader(path, "truth", &columns)?;
    let mut log = LogData {
        records: Vec::new(),
        renormalised: 0,
    };
    let mut truth = Vec::new();
    for row in csv.records() {
        let row = row.map_err(|e| super::csv_error(path, e))?;
        let line = record_line(&row);
        let v = parse_floats(path, &row, &columns)?;
        push_record(path, line, &v[..12], &mut log)?;
        let q = unit(Quaternion::new(v[15], v[16], v[17], v[18]))
            .ok_or_else(|| format_error(path, line, "true orientation is not a unit quaternion"))?;
        truth.push(TruthSample {
            t: v[0],
            pose: Pose::new(Vector3::new(v[12], v[13], v[14]), q),
        });
    }
    Ok(TruthData { log, truth })
}

/// Reads an estimate file written by a SLAM run.
pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRow>> {
    let mut csv = csv_reader(path, "estimates", &ESTIMATE_COLUMNS)?;
    let mut rows = Vec::new();
    for row in csv.records() {
        let row = row.map_err(|e| super::csv_error(path, e))?;
        let line = record_line(&row);
        let v = parse_floats(path, &row, &ESTIMATE_COLUMNS)?;
        let int = |x: f64, name: &str| {
            if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 {
                Ok(x as i32)
            } else {
                Err(format_error(path, line, format!("{name} must be an integer, got {x}")))
            }
        };
        let resampled = match v[12] {
            0.0 => false,
            1.0 => true,
            other => return Err(format_error(path, line, format!("resampled must be 0 or 1, got {other}"))),
        };
        let q = unit(Quaternion::new(v[4], v[5], v[6], v[7]))
            .ok_or_else(|| format_error(path, line, "orientation is not a unit quaternion"))?;
        rows.push(EstimateRow {
            t: v[0],
            pose: Pose::new(Vector3::new(v[1], v[2], v[3]), q),
            tile: TileId::new(int(v[8], "tile_a")?, int(v[9], "tile_b")?, int(v[10], "tile_k")?),
            ess: v[11],
            resampled,
        });
    }
    Ok(rows)
}
