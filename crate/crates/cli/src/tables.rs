//! CSV outputs. Every file has a header row; floats use the shortest
//! representation that round-trips, so identical runs give identical bytes.

use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use uvt::altmin::IterationTrace;
use uvt::geometry::GeometryEstimate;
use uvt::moments::classify_branch;

use crate::error::{CliError, Result};
use crate::fsutil::{read_file, write_atomic};

pub const GEOMETRY_HEADER: [&str; 3] = ["index", "angle_rad", "shift"];
pub const TRACE_HEADER: [&str; 7] = [
    "iteration",
    "image_delta",
    "rrmse",
    "ssim",
    "cc",
    "mean_angle_err_deg",
    "mean_shift_err",
];
pub const METRICS_HEADER: [&str; 7] = [
    "method",
    "gamma",
    "M",
    "rrmse",
    "ssim",
    "cc",
    "mean_angle_err_deg",
];
pub const SCATTER_HEADER: [&str; 4] = ["index", "true_angle_rad", "est_angle_rad", "branch"];
pub const PLOT_HEADER: [&str; 3] = ["iter", "rrmse", "ssim"];

fn to_csv<const K: usize>(
    header: [&str; K],
    rows: impl IntoIterator<Item = [String; K]>,
) -> Vec<u8> {
    let mut w = WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows of `path` after checking the header, each with its line number.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, StringRecord)>> {
    let bytes = read_file(path)?;
    let mut r = ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    let mut seen_header = false;
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if !seen_header {
            if rec.iter().ne(header.iter().copied()) {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected header '{}'", header.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        rows.push((line, rec));
    }
    if !seen_header {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header row".into(),
        });
    }
    Ok(rows)
}

fn field<T: FromStr>(path: &Path, line: u64, rec: &StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column {} has invalid value '{raw}'", i + 1),
    })
}

fn opt_field(path: &Path, line: u64, rec: &StringRecord, i: usize) -> Result<Option<f64>> {
    match rec.get(i) {
        Some("") | None => Ok(None),
        Some(_) => field(path, line, rec, i).map(Some),
    }
}

pub fn geometry_csv(geom: &GeometryEstimate) -> Vec<u8> {
    to_csv(
        GEOMETRY_HEADER,
        geom.angles()
            .iter()
            .zip(geom.shifts())
            .enumerate()
            .map(|(i, (a, k))| [i.to_string(), a.to_string(), k.to_string()]),
    )
}

pub fn read_geometry(path: &Path) -> Result<GeometryEstimate> {
    let rows = read_rows(path, &GEOMETRY_HEADER)?;
    let mut angles = Vec::with_capacity(rows.len());
    let mut shifts = Vec::with_capacity(rows.len());
    for (expect, (line, rec)) in rows.iter().enumerate() {
        let idx: usize = field(path, *line, rec, 0)?;
        if idx != expect {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("expected index {expect}, found {idx}"),
            });
        }
        angles.push(field(path, *line, rec, 1)?);
        shifts.push(field(path, *line, rec, 2)?);
    }
    Ok(GeometryEstimate::new(angles, shifts)?)
}

pub fn trace_csv(trace: Option<&IterationTrace>) -> Vec<u8> {
    let records = trace.map(|t| t.records.as_slice()).unwrap_or(&[]);
    to_csv(
        TRACE_HEADER,
        records.iter().map(|r| {
            let t = r.truth;
            [
                r.iteration.to_string(),
                r.image_delta.to_string(),
                opt(t.map(|m| m.rrmse)),
                opt(t.map(|m| m.ssim)),
                opt(t.map(|m| m.cc)),
                opt(t.map(|m| m.mean_angle_err_deg)),
                opt(t.map(|m| m.mean_shift_err)),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub image_delta: f64,
    pub rrmse: Option<f64>,
    pub ssim: Option<f64>,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(path, &TRACE_HEADER)?
        .iter()
        .map(|(line, rec)| {
            Ok(TraceRow {
                iteration: field(path, *line, rec, 0)?,
                image_delta: field(path, *line, rec, 1)?,
                rrmse: opt_field(path, *line, rec, 2)?,
                ssim: opt_field(path, *line, rec, 3)?,
            })
        })
        .collect()
}

pub fn plot_csv(rows: &[TraceRow]) -> Vec<u8> {
    to_csv(
        PLOT_HEADER,
        rows.iter()
            .map(|r| [r.iteration.to_string(), opt(r.rrmse), opt(r.ssim)]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub gamma: f64,
    pub max_shift: i32,
    pub rrmse: f64,
    pub ssim: f64,
    pub cc: f64,
    pub mean_angle_err_deg: Option<f64>,
}

impl MetricsRow {
    fn fields(&self) -> [String; 7] {
        [
            self.method.clone(),
            self.gamma.to_string(),
            self.max_shift.to_string(),
            self.rrmse.to_string(),
            self.ssim.to_string(),
            self.cc.to_string(),
            opt(self.mean_angle_err_deg),
        ]
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_rows(path, &METRICS_HEADER)?
        .iter()
        .map(|(line, rec)| {
            Ok(MetricsRow {
                method: rec.get(0).unwrap_or("").to_string(),
                gamma: field(path, *line, rec, 1)?,
                max_shift: field(path, *line, rec, 2)?,
                rrmse: field(path, *line, rec, 3)?,
                ssim: field(path, *line, rec, 4)?,
                cc: field(path, *line, rec, 5)?,
                mean_angle_err_deg: opt_field(path, *line, rec, 6)?,
            })
        })
        .collect()
}

/// Appends `row` to the metrics file at `path`, creating it with a header
/// when absent. The whole file is rewritten atomically.
pub fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    let mut rows = if path.exists() {
        read_metrics(path)?
    } else {
        Vec::new()
    };
    rows.push(row.clone());
    write_atomic(
        path,
        &to_csv(METRICS_HEADER, rows.iter().map(MetricsRow::fields)),
    )
}

pub fn scatter_csv(est: &[f64], truth: &[f64], phi: f64) -> Vec<u8> {
    to_csv(
        SCATTER_HEADER,
        est.iter().zip(truth).enumerate().map(|(i, (&e, &t))| {
            [
                i.to_string(),
                t.to_string(),
                e.to_string(),
                classify_branch(e, t, phi).name().to_string(),
            ]
        }),
    )
}
