//! Update-averaged comparison of two runs: the mean per-update cost ratio
//! and the mean cumulative-recourse ratio (with +1 in numerator and
//! denominator to avoid division by zero).

use crate::error::HarnessError;
use crate::records::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub phi: f64,
    pub psi: f64,
}

pub fn compare_runs(a: &[RunRecord], b: &[RunRecord]) -> Result<Comparison, HarnessError> {
    if a.len() != b.len() {
        return Err(HarnessError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(HarnessError::Config("cannot compare empty runs".into()));
    }
    let n = a.len() as f64;
    let phi = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.cost / rb.cost)
        .sum::<f64>()
        / n;
    let psi = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| (ra.total_recourse() + 1) as f64 / (rb.total_recourse() + 1) as f64)
        .sum::<f64>()
        / n;
    Ok(Comparison { phi, psi })
}
