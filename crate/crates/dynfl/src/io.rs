//! Point-cloud ingestion: one point per line, comma-separated decimal
//! coordinates, uniform dimension.

use std::fs;
use std::path::Path;

use crate::error::HarnessError;

#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
    pub dim: usize,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn ingest(path: &Path) -> Result<PointSet, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut point = Vec::new();
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| HarnessError::BadField {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: format!("not a number: {:?}", field.trim()),
            })?;
            if !value.is_finite() {
                return Err(HarnessError::BadField {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    detail: format!("non-finite coordinate {value}"),
                });
            }
            point.push(value);
        }
        if points.is_empty() {
            dim = point.len();
        } else if point.len() != dim {
            return Err(HarnessError::RaggedRow {
                path: path.to_path_buf(),
                line: lineno + 1,
                expected: dim,
                got: point.len(),
            });
        }
        points.push(point);
    }
    if points.is_empty() {
        return Err(HarnessError::EmptyInput { path: path.to_path_buf() });
    }
    Ok(PointSet { points, dim })
}
