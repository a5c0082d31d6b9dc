#![forbid(unsafe_code)]

//! Benchmark harness for the dynamic facility location engine: CSV and
//! synthetic point sources, facility sampling and opening-cost calibration,
//! sliding-window update streams over three algorithms, per-update metric
//! records, and update-averaged run comparison.

pub mod compare;
pub mod error;
pub mod io;
pub mod records;
pub mod run;
pub mod stream;
pub mod synth;

pub use compare::{compare_runs, Comparison};
pub use error::HarnessError;
pub use io::{ingest, PointSet};
pub use records::{read_records, write_records, write_records_to_path, RunRecord, UpdateOp};
pub use run::{run_stream, Algorithm, AuditPolicy, RunConfig, RunOutcome};
pub use stream::{calibrate_costs, permutation, split_facilities};
pub use synth::{generate, SynthConfig};
