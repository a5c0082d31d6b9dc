//! Per-update metric rows and their CSV form.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::HarnessError;

pub const CSV_HEADER: &str = "idx,op,cost,client_recourse,facility_recourse,open,usec";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOp {
    Insert,
    Delete,
}

impl fmt::Display for UpdateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateOp::Insert => "insert",
            UpdateOp::Delete => "delete",
        })
    }
}

impl FromStr for UpdateOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "insert" => Ok(UpdateOp::Insert),
            "delete" => Ok(UpdateOp::Delete),
            other => Err(format!("unknown op {other:?}")),
        }
    }
}

/// One row per update: solution cost, cumulative recourse split by kind,
/// open facility count, and wall time in microseconds. Rows with
/// `idx < window` are the warm-up fill of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub idx: usize,
    pub op: UpdateOp,
    pub cost: f64,
    pub client_recourse: u64,
    pub facility_recourse: u64,
    pub open: usize,
    pub usec: u64,
}

impl RunRecord {
    pub fn total_recourse(&self) -> u64 {
        self.client_recourse + self.facility_recourse
    }
}

pub fn write_records(records: &[RunRecord], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.idx, r.op, r.cost, r.client_recourse, r.facility_recourse, r.open, r.usec
        )?;
    }
    Ok(())
}

pub fn write_records_to_path(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut buffer = Vec::new();
    write_records(records, &mut buffer).expect("writing to memory cannot fail");
    fs::write(path, buffer).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != CSV_HEADER {
                return Err(HarnessError::BadField {
                    path: path.to_path_buf(),
                    line: 1,
                    detail: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::RaggedRow {
                path: path.to_path_buf(),
                line: lineno + 1,
                expected: 7,
                got: fields.len(),
            });
        }
        let bad = |detail: String| HarnessError::BadField {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail,
        };
        records.push(RunRecord {
            idx: fields[0].parse().map_err(|e| bad(format!("idx: {e}")))?,
            op: fields[1].parse().map_err(bad)?,
            cost: fields[2].parse().map_err(|e| bad(format!("cost: {e}")))?,
            client_recourse: fields[3].parse().map_err(|e| bad(format!("client_recourse: {e}")))?,
            facility_recourse: fields[4]
                .parse()
                .map_err(|e| bad(format!("facility_recourse: {e}")))?,
            open: fields[5].parse().map_err(|e| bad(format!("open: {e}")))?,
            usec: fields[6].parse().map_err(|e| bad(format!("usec: {e}")))?,
        });
    }
    Ok(records)
}
