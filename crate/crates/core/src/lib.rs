#![forbid(unsafe_code)]

//! Fully dynamic facility location with bounded recourse.
//!
//! The crate maintains, under client insertions and deletions, a clustering
//! whose cost stays within a constant factor of optimal while clients and
//! facilities are reassigned only rarely. The pieces:
//!
//! - [`instance`]: facilities, opening costs, the positive distance oracle,
//!   and the exponential level geometry.
//! - [`engine`]: the level-based clustering state and its repair loop.
//! - [`detector`]: per-facility bucketized counters that locate blocking
//!   clusters (the repair loop's work source) in roughly polylog time per
//!   facility/level pair.
//! - [`verify`]: brute-force invariant auditor, dual feasibility
//!   certificate, exact solver for tiny instances, and detector cross-checks.
//! - [`baselines`]: the offline greedy and the nearest-facility heuristic.

pub mod baselines;
pub mod detector;
pub mod engine;
pub mod instance;
pub mod verify;

pub use detector::{BlockingCandidate, BlockingDetector, DetectorError, FacilityContext};
pub use engine::{
    BlockingBirth, Cluster, ClusterId, ClusterKind, ClusteringState, EngineError,
    InsertionPolicy, Level, RawCluster, RecourseLedger,
};
pub use instance::{ClientId, FacilityId, InstanceError, LevelGeometry, MetricInstance};
pub use verify::{
    audit, build_dual, check_certificate, detector_equivalence, exact_opt, AuditReport,
    CertificateCheck, Check, DualCertificate, ExactOpt, VerifyError, Witness,
};
