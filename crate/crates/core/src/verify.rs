//! Independent verification oracles.
//!
//! Everything here recomputes its answers from the instance and the state's
//! public views, sharing nothing with the incremental detector below the
//! distance oracle and the level geometry:
//!
//! - [`audit`]: a full invariant auditor. The no-blocking check runs an
//!   exhaustive prefix search over every (facility, level) pair with exact
//!   distances rounded up to buckets.
//! - [`build_dual`] / [`check_certificate`]: a scaled dual solution whose
//!   feasibility certifies the approximation factor of an audited state.
//! - [`exact_opt`]: exact optimum by enumerating facility subsets (tiny
//!   instances only).
//! - [`detector_equivalence`]: exhaustive subset search cross-checked
//!   against the incremental detector on every (facility, level) pair.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::engine::{ClusterId, ClusterKind, ClusteringState};
use crate::instance::{ClientId, FacilityId, InstanceError, MetricInstance};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("instance has {got} facilities, limit for this oracle is {limit}")]
    TooManyFacilities { got: usize, limit: usize },
    #[error("state has {got} clients, limit for this oracle is {limit}")]
    TooManyClients { got: usize, limit: usize },
    #[error("certificate construction requires epsilon = 1 and mu = 3")]
    NotProvenRegime,
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// First witness of a failed check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Witness {
    pub cluster: Option<ClusterId>,
    pub facility: Option<FacilityId>,
    pub client: Option<ClientId>,
    pub level: Option<i32>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    Pass,
    Fail(Witness),
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(self, Check::Pass)
    }
}

/// Outcome of a full audit. `structure` covers the clustering properties
/// (every active client in exactly one cluster, one critical per open
/// facility, satellites singleton); the remaining checks are the four
/// invariants in order.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub structure: Check,
    pub average_cost_bound: Check,
    pub critical_minimality: Check,
    pub assignment_levels: Check,
    pub no_blocking: Check,
    pub elapsed: Duration,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.structure.passed()
            && self.average_cost_bound.passed()
            && self.critical_minimality.passed()
            && self.assignment_levels.passed()
            && self.no_blocking.passed()
    }

    pub fn first_failure(&self) -> Option<&Witness> {
        for check in [
            &self.structure,
            &self.average_cost_bound,
            &self.critical_minimality,
            &self.assignment_levels,
            &self.no_blocking,
        ] {
            if let Check::Fail(w) = check {
                return Some(w);
            }
        }
        None
    }
}

/// Audits the state against all invariants. Failures land in the report;
/// this never errors.
pub fn audit(instance: &MetricInstance, state: &ClusteringState) -> AuditReport {
    let start = Instant::now();
    let report = AuditReport {
        structure: check_structure(instance, state),
        average_cost_bound: check_average_cost(instance, state),
        critical_minimality: check_critical_minimality(state),
        assignment_levels: check_assignment_levels(instance, state),
        no_blocking: check_no_blocking(instance, state),
        elapsed: Duration::ZERO,
    };
    AuditReport { elapsed: start.elapsed(), ..report }
}

fn check_structure(instance: &MetricInstance, state: &ClusteringState) -> Check {
    let mut assigned: BTreeSet<ClientId> = BTreeSet::new();
    let mut criticals: BTreeMap<FacilityId, usize> = BTreeMap::new();
    let mut facilities_used: BTreeSet<FacilityId> = BTreeSet::new();
    for (cid, cluster) in state.clusters() {
        facilities_used.insert(cluster.facility());
        match cluster.kind() {
            ClusterKind::Critical => {
                *criticals.entry(cluster.facility()).or_insert(0) += 1;
            }
            ClusterKind::Satellite => {
                if cluster.len() != 1 {
                    return Check::Fail(Witness {
                        cluster: Some(cid),
                        facility: Some(cluster.facility()),
                        detail: format!("satellite cluster with {} clients", cluster.len()),
                        ..Witness::default()
                    });
                }
            }
        }
        for j in cluster.clients() {
            if !instance.is_active(j) {
                return Check::Fail(Witness {
                    cluster: Some(cid),
                    client: Some(j),
                    detail: "assigned client is not active".into(),
                    ..Witness::default()
                });
            }
            if !assigned.insert(j) {
                return Check::Fail(Witness {
                    cluster: Some(cid),
                    client: Some(j),
                    detail: "client assigned to two clusters".into(),
                    ..Witness::default()
                });
            }
        }
    }
    for facility in &facilities_used {
        if criticals.get(facility).copied().unwrap_or(0) != 1 {
            return Check::Fail(Witness {
                facility: Some(*facility),
                detail: "open facility without exactly one critical cluster".into(),
                ..Witness::default()
            });
        }
    }
    for j in instance.active_clients() {
        if !assigned.contains(&j) {
            return Check::Fail(Witness {
                client: Some(j),
                detail: "active client not assigned to any cluster".into(),
                ..Witness::default()
            });
        }
    }
    Check::Pass
}

fn check_average_cost(instance: &MetricInstance, state: &ClusteringState) -> Check {
    let geometry = state.geometry();
    for (cid, cluster) in state.clusters() {
        let threshold = geometry.threshold(cluster.level());
        // Same cross-multiplied comparison the engine uses; an empty cluster
        // always fails it.
        if cluster.cost(instance) >= threshold * cluster.len() as f64 {
            return Check::Fail(Witness {
                cluster: Some(cid),
                facility: Some(cluster.facility()),
                level: Some(cluster.level()),
                detail: format!(
                    "average cost {} not below threshold {threshold}",
                    cluster.average_cost(instance)
                ),
                ..Witness::default()
            });
        }
    }
    Check::Pass
}

fn check_critical_minimality(state: &ClusteringState) -> Check {
    let mut min_level: BTreeMap<FacilityId, i32> = BTreeMap::new();
    let mut critical_level: BTreeMap<FacilityId, i32> = BTreeMap::new();
    for (_, cluster) in state.clusters() {
        let entry = min_level.entry(cluster.facility()).or_insert(i32::MAX);
        *entry = (*entry).min(cluster.level());
        if cluster.kind() == ClusterKind::Critical {
            critical_level.insert(cluster.facility(), cluster.level());
        }
    }
    for (facility, &min) in &min_level {
        match critical_level.get(facility) {
            Some(&cl) if cl <= min => {}
            Some(&cl) => {
                return Check::Fail(Witness {
                    facility: Some(*facility),
                    level: Some(cl),
                    detail: format!("critical cluster at level {cl} above minimum {min}"),
                    ..Witness::default()
                })
            }
            None => {
                return Check::Fail(Witness {
                    facility: Some(*facility),
                    detail: "no critical cluster".into(),
                    ..Witness::default()
                })
            }
        }
    }
    Check::Pass
}

fn check_assignment_levels(instance: &MetricInstance, state: &ClusteringState) -> Check {
    let geometry = state.geometry();
    for (cid, cluster) in state.clusters() {
        for j in cluster.clients() {
            let d = match instance.distance(cluster.facility(), j) {
                Ok(d) => d,
                Err(e) => {
                    return Check::Fail(Witness {
                        cluster: Some(cid),
                        client: Some(j),
                        detail: format!("distance oracle failure: {e}"),
                        ..Witness::default()
                    })
                }
            };
            let kappa = geometry
                .min_assignment_level(d)
                .expect("positive distance");
            if cluster.level() < kappa {
                return Check::Fail(Witness {
                    cluster: Some(cid),
                    facility: Some(cluster.facility()),
                    client: Some(j),
                    level: Some(cluster.level()),
                    detail: format!("client below its minimum admissible level {kappa}"),
                });
            }
        }
    }
    Check::Pass
}

/// Per-facility view used by the search oracles.
struct FacilityView {
    opening_cost: f64,
    critical_level: Option<i32>,
    min_cluster_level: Option<i32>,
    /// All assigned clients sorted by (distance, id), with level and bucket.
    neighbors: Vec<(f64, ClientId, i32, i32)>,
}

fn facility_views(instance: &MetricInstance, state: &ClusteringState) -> Vec<FacilityView> {
    let geometry = state.geometry();
    let mut views: Vec<FacilityView> = instance
        .facilities()
        .map(|f| FacilityView {
            opening_cost: instance.opening_cost(f).expect("facility in range"),
            critical_level: None,
            min_cluster_level: None,
            neighbors: Vec::new(),
        })
        .collect();
    for (_, cluster) in state.clusters() {
        let v = &mut views[cluster.facility().index()];
        if cluster.kind() == ClusterKind::Critical {
            v.critical_level = Some(cluster.level());
        }
        v.min_cluster_level = Some(match v.min_cluster_level {
            Some(ml) => ml.min(cluster.level()),
            None => cluster.level(),
        });
    }
    for facility in instance.facilities() {
        let mut neighbors = Vec::new();
        for (_, cluster) in state.clusters() {
            for j in cluster.clients() {
                let d = instance.distance(facility, j).expect("assigned client active");
                let bucket = geometry.distance_bucket(d).expect("positive distance");
                neighbors.push((d, j, cluster.level(), bucket));
            }
        }
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        views[facility.index()].neighbors = neighbors;
    }
    views
}

fn candidate_level_range(views: &[FacilityView]) -> Option<(i32, i32)> {
    let mut min_bucket = i32::MAX;
    let mut max_level = i32::MIN;
    for view in views {
        for &(_, _, level, bucket) in &view.neighbors {
            min_bucket = min_bucket.min(bucket);
            max_level = max_level.max(level);
        }
    }
    if min_bucket == i32::MAX {
        None
    } else {
        Some((min_bucket, max_level))
    }
}

fn check_no_blocking(instance: &MetricInstance, state: &ClusteringState) -> Check {
    let geometry = state.geometry();
    let mu = geometry.mu();
    let views = facility_views(instance, state);
    let Some((min_bucket, max_level)) = candidate_level_range(&views) else {
        return Check::Pass;
    };
    for (fi, view) in views.iter().enumerate() {
        for k in min_bucket + mu..max_level {
            let threshold = geometry.threshold(k - mu);
            let satellite_ok = view.critical_level.is_some_and(|cl| cl <= k);
            let critical_ok = view.min_cluster_level.is_none_or(|ml| k <= ml);
            let mut count: u64 = 0;
            let mut weight = 0.0f64;
            for &(_, j, level, bucket) in &view.neighbors {
                if level <= k || bucket > k - mu {
                    continue;
                }
                if satellite_ok && bucket < k - mu {
                    return Check::Fail(Witness {
                        facility: Some(FacilityId::new(fi as u32)),
                        client: Some(j),
                        level: Some(k),
                        detail: "satellite blocking cluster".into(),
                        ..Witness::default()
                    });
                }
                if critical_ok {
                    count += 1;
                    weight += geometry.threshold(bucket);
                    if view.opening_cost + weight < threshold * count as f64 {
                        return Check::Fail(Witness {
                            facility: Some(FacilityId::new(fi as u32)),
                            client: Some(j),
                            level: Some(k),
                            detail: format!("critical blocking cluster of size {count}"),
                            ..Witness::default()
                        });
                    }
                }
            }
        }
    }
    Check::Pass
}

/// Scaled dual solution derived from a clustering: `alpha_j` is the level
/// threshold of the client's cluster and `beta_ij = max(0, alpha_j/sigma -
/// d_ij)`, with `sigma = 2^10`. Only nonzero betas are stored.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub alpha: BTreeMap<ClientId, f64>,
    pub beta: BTreeMap<(FacilityId, ClientId), f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub feasible: bool,
    pub primal: f64,
    pub dual_sum: f64,
}

pub fn build_dual(
    instance: &MetricInstance,
    state: &ClusteringState,
) -> Result<DualCertificate, VerifyError> {
    let geometry = state.geometry();
    if geometry.epsilon() != 1.0 || geometry.mu() != 3 {
        return Err(VerifyError::NotProvenRegime);
    }
    let sigma = 1024.0;
    let mut alpha = BTreeMap::new();
    for (_, cluster) in state.clusters() {
        for j in cluster.clients() {
            alpha.insert(j, geometry.threshold(cluster.level()));
        }
    }
    let mut beta = BTreeMap::new();
    for facility in instance.facilities() {
        for (&j, &a) in &alpha {
            let v = a / sigma - instance.distance(facility, j)?;
            if v > 0.0 {
                beta.insert((facility, j), v);
            }
        }
    }
    Ok(DualCertificate { alpha, beta, sigma })
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + (1e-9 * rhs.abs()).max(1e-12)
}

/// Verifies that the scaled dual is feasible and that the solution cost is
/// bounded by the dual objective. Feasibility of an audited state certifies
/// `solution_cost <= sigma * OPT`.
pub fn check_certificate(
    instance: &MetricInstance,
    state: &ClusteringState,
    certificate: &DualCertificate,
) -> Result<CertificateCheck, VerifyError> {
    let sigma = certificate.sigma;
    let mut feasible = true;
    // Per-facility budget: sum of betas within the opening cost.
    for facility in instance.facilities() {
        let mut total = 0.0f64;
        for (&j, &a) in &certificate.alpha {
            let v = (a / sigma - instance.distance(facility, j)?).max(0.0);
            total += v;
        }
        if !within(total, instance.opening_cost(facility)?) {
            feasible = false;
        }
    }
    // Per-pair constraint: scaled alpha minus beta within the distance.
    if feasible {
        'outer: for facility in instance.facilities() {
            for (&j, &a) in &certificate.alpha {
                let beta = certificate.beta.get(&(facility, j)).copied().unwrap_or(0.0);
                if !within(a / sigma - beta, instance.distance(facility, j)?) {
                    feasible = false;
                    break 'outer;
                }
            }
        }
    }
    let primal = state.solution_cost(instance);
    let dual_sum: f64 = certificate.alpha.values().sum();
    if !within(primal, dual_sum) {
        feasible = false;
    }
    Ok(CertificateCheck { feasible, primal, dual_sum })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOpt {
    pub cost: f64,
    pub open: BTreeSet<FacilityId>,
}

const EXACT_OPT_LIMIT: usize = 20;

/// Exact optimum by enumerating every nonempty facility subset and assigning
/// each client to its nearest open facility. With no clients the optimum is
/// the empty opening with cost zero.
pub fn exact_opt(instance: &MetricInstance) -> Result<ExactOpt, VerifyError> {
    let m = instance.facility_count();
    if m > EXACT_OPT_LIMIT {
        return Err(VerifyError::TooManyFacilities { got: m, limit: EXACT_OPT_LIMIT });
    }
    let clients: Vec<ClientId> = instance.active_clients().collect();
    if clients.is_empty() {
        return Ok(ExactOpt { cost: 0.0, open: BTreeSet::new() });
    }
    let mut best: Option<(f64, u64)> = None;
    for mask in 1u64..(1u64 << m) {
        let mut cost = 0.0f64;
        for fi in 0..m {
            if mask & (1 << fi) != 0 {
                cost += instance.opening_cost(FacilityId::new(fi as u32))?;
            }
        }
        for &j in &clients {
            let mut nearest = f64::INFINITY;
            for fi in 0..m {
                if mask & (1 << fi) != 0 {
                    let d = instance.distance(FacilityId::new(fi as u32), j)?;
                    if d < nearest {
                        nearest = d;
                    }
                }
            }
            cost += nearest;
        }
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, mask));
        }
    }
    let (cost, mask) = best.expect("at least one subset");
    let open = (0..m)
        .filter(|fi| mask & (1 << fi) != 0)
        .map(|fi| FacilityId::new(fi as u32))
        .collect();
    Ok(ExactOpt { cost, open })
}

const EQUIVALENCE_CLIENT_LIMIT: usize = 12;

/// Exhaustive-search answer to "does a blocking cluster exist at
/// (facility, k)?" under bucketized distances, enumerating all client
/// subsets rather than prefixes.
pub fn exhaustive_blocking_exists(
    instance: &MetricInstance,
    state: &ClusteringState,
    facility: FacilityId,
    k: i32,
) -> Result<bool, VerifyError> {
    if state.assigned_count() > EQUIVALENCE_CLIENT_LIMIT {
        return Err(VerifyError::TooManyClients {
            got: state.assigned_count(),
            limit: EQUIVALENCE_CLIENT_LIMIT,
        });
    }
    let geometry = state.geometry();
    let mu = geometry.mu();
    let threshold = geometry.threshold(k - mu);
    let mut critical_level: Option<i32> = None;
    let mut min_cluster_level: Option<i32> = None;
    for (_, cluster) in state.clusters() {
        if cluster.facility() == facility {
            if cluster.kind() == ClusterKind::Critical {
                critical_level = Some(cluster.level());
            }
            min_cluster_level = Some(match min_cluster_level {
                Some(ml) => ml.min(cluster.level()),
                None => cluster.level(),
            });
        }
    }
    let satellite_ok = critical_level.is_some_and(|cl| cl <= k);
    let critical_ok = min_cluster_level.is_none_or(|ml| k <= ml);
    if !satellite_ok && !critical_ok {
        return Ok(false);
    }

    // Eligible clients: above level k and admissible for it.
    let mut weights: Vec<f64> = Vec::new();
    let mut buckets: Vec<i32> = Vec::new();
    for (_, cluster) in state.clusters() {
        if cluster.level() <= k {
            continue;
        }
        for j in cluster.clients() {
            let d = instance.distance(facility, j)?;
            let bucket = geometry.distance_bucket(d)?;
            if bucket <= k - mu {
                weights.push(geometry.threshold(bucket));
                buckets.push(bucket);
            }
        }
    }
    if satellite_ok && buckets.iter().any(|&b| b < k - mu) {
        return Ok(true);
    }
    if critical_ok {
        let opening = instance.opening_cost(facility)?;
        let n = weights.len();
        for mask in 1u64..(1u64 << n) {
            let mut total = 0.0f64;
            let mut size = 0u64;
            for (idx, &w) in weights.iter().enumerate() {
                if mask & (1 << idx) != 0 {
                    total += w;
                    size += 1;
                }
            }
            if opening + total < threshold * size as f64 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Cross-checks the incremental detector against the exhaustive subset
/// search on every (facility, level) pair. True iff they agree everywhere.
pub fn detector_equivalence(
    instance: &MetricInstance,
    state: &ClusteringState,
) -> Result<bool, VerifyError> {
    if state.assigned_count() > EQUIVALENCE_CLIENT_LIMIT {
        return Err(VerifyError::TooManyClients {
            got: state.assigned_count(),
            limit: EQUIVALENCE_CLIENT_LIMIT,
        });
    }
    let geometry = state.geometry();
    let mu = geometry.mu();
    let views = facility_views(instance, state);
    let Some((min_bucket, max_level)) = candidate_level_range(&views) else {
        return Ok(true);
    };
    for facility in instance.facilities() {
        let ctx = state.facility_context(instance, facility);
        for k in min_bucket + mu..max_level {
            let incremental = state.detector().exists_blocking(geometry, facility, k, &ctx);
            let exhaustive = exhaustive_blocking_exists(instance, state, facility, k)?;
            if incremental != exhaustive {
                return Ok(false);
            }
            if incremental {
                // The extracted cluster must itself satisfy the definition.
                let candidate = state
                    .detector()
                    .extract_blocking(geometry, facility, k, &ctx)
                    .expect("extraction succeeds where existence holds");
                let mut weight = 0.0f64;
                for &j in &candidate.clients {
                    let d = instance.distance(facility, j)?;
                    weight += geometry.threshold(geometry.distance_bucket(d)?);
                }
                let opening = match candidate.kind {
                    ClusterKind::Critical => instance.opening_cost(facility)?,
                    ClusterKind::Satellite => 0.0,
                };
                let threshold = geometry.threshold(k - mu);
                if opening + weight >= threshold * candidate.clients.len() as f64 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{InsertionPolicy, RawCluster};
    use crate::instance::LevelGeometry;

    fn proven() -> LevelGeometry {
        LevelGeometry::new(1.0, 3).unwrap()
    }

    fn single_cluster_state() -> (MetricInstance, ClusteringState) {
        let mut inst = MetricInstance::with_matrix(vec![5.0]).unwrap();
        let mut state =
            ClusteringState::new(proven(), 1, InsertionPolicy::NearestOpen);
        let j = inst.add_client_column(vec![1.0]).unwrap();
        state.insert(&inst, j).unwrap();
        (inst, state)
    }

    #[test]
    fn audit_passes_on_fresh_state() {
        let (inst, state) = single_cluster_state();
        let report = audit(&inst, &state);
        assert!(report.all_pass(), "{:?}", report.first_failure());
        assert!(report.first_failure().is_none());
    }

    #[test]
    fn audit_flags_client_below_admissible_level() {
        // kappa(1.0) = 4; planting the cluster at level 3 violates the
        // assignment-level invariant with that client as witness.
        let mut inst = MetricInstance::with_matrix(vec![50.0]).unwrap();
        let j = inst.add_client_column(vec![1.0]).unwrap();
        let state = ClusteringState::from_parts(
            &inst,
            proven(),
            InsertionPolicy::NearestOpen,
            vec![RawCluster {
                facility: FacilityId::new(0),
                kind: ClusterKind::Critical,
                level: 3,
                clients: vec![j],
            }],
        )
        .unwrap();
        let report = audit(&inst, &state);
        match &report.assignment_levels {
            Check::Fail(witness) => assert_eq!(witness.client, Some(j)),
            Check::Pass => panic!("level-3 placement must fail the audit"),
        }
    }

    #[test]
    fn audit_flags_cheap_unopened_facility_and_matches_scan() {
        // Clients parked at level 6 on an expensive facility while a cheap
        // closed facility sits at distance 1: a blocking cluster at level 5.
        let mut inst = MetricInstance::with_matrix(vec![50.0, 2.0]).unwrap();
        let j1 = inst.add_client_column(vec![4.0, 1.0]).unwrap();
        let j2 = inst.add_client_column(vec![4.0, 1.0]).unwrap();
        let state = ClusteringState::from_parts(
            &inst,
            proven(),
            InsertionPolicy::NearestOpen,
            vec![RawCluster {
                facility: FacilityId::new(0),
                kind: ClusterKind::Critical,
                level: 6,
                clients: vec![j1, j2],
            }],
        )
        .unwrap();
        let report = audit(&inst, &state);
        let witness = match &report.no_blocking {
            Check::Fail(w) => w,
            Check::Pass => panic!("cheap facility must surface as a blocking cluster"),
        };
        let contexts: Vec<_> = inst
            .facilities()
            .map(|f| state.facility_context(&inst, f))
            .collect();
        let scanned = state.detector().scan_all(state.geometry(), &contexts).unwrap();
        assert_eq!(witness.facility, Some(scanned.0));
        assert_eq!(witness.level, Some(scanned.1));
        assert_eq!(scanned, (FacilityId::new(1), 5));
    }

    #[test]
    fn dual_certificate_on_single_cluster_state() {
        let (inst, state) = single_cluster_state();
        let certificate = build_dual(&inst, &state).unwrap();
        // One client at level 6: alpha = 2^6.
        let alphas: Vec<f64> = certificate.alpha.values().copied().collect();
        assert_eq!(alphas, vec![64.0]);
        // alpha/sigma = 0.0625 < d = 1 for the only pair: beta identically 0.
        assert!(certificate.beta.is_empty());
        let check = check_certificate(&inst, &state, &certificate).unwrap();
        assert!(check.feasible);
        assert_eq!(check.primal, 6.0);
        assert_eq!(check.dual_sum, 64.0);
    }

    #[test]
    fn clients_at_the_same_level_share_alpha() {
        let mut inst = MetricInstance::with_matrix(vec![5.0]).unwrap();
        let mut state = ClusteringState::new(proven(), 1, InsertionPolicy::NearestOpen);
        let a = inst.add_client_column(vec![1.0]).unwrap();
        state.insert(&inst, a).unwrap();
        let b = inst.add_client_column(vec![1.5]).unwrap();
        state.insert(&inst, b).unwrap();
        assert_eq!(state.level_of(a), state.level_of(b));
        let certificate = build_dual(&inst, &state).unwrap();
        assert_eq!(certificate.alpha[&a], certificate.alpha[&b]);
    }

    #[test]
    fn certificate_requires_proven_regime() {
        let mut inst = MetricInstance::with_matrix(vec![5.0]).unwrap();
        let mut state = ClusteringState::new(
            LevelGeometry::new(0.5, 3).unwrap(),
            1,
            InsertionPolicy::NearestOpen,
        );
        let j = inst.add_client_column(vec![1.0]).unwrap();
        state.insert(&inst, j).unwrap();
        assert!(matches!(build_dual(&inst, &state), Err(VerifyError::NotProvenRegime)));
    }
}
