//! The dynamic clustering engine.
//!
//! A `ClusteringState` maintains, under client insertions and deletions, a
//! clustering in which every cluster carries an integer level encoding its
//! average cost up to the geometry base. After every completed update the
//! state satisfies four invariants:
//!
//! 1. every cluster's average cost is below the threshold of its level;
//! 2. per open facility, the critical cluster has the minimum level;
//! 3. every client sits at or above its minimum admissible level;
//! 4. no blocking cluster exists anywhere (under the detector's bucketized
//!    test).
//!
//! Updates restore the invariants through a repair loop that first installs
//! any blocking cluster reported by the detector (lowest level first, then
//! lowest facility id) and otherwise lifts a cluster violating the average
//! cost bound (same scan order). Facility openings/closings and client
//! reassignments are tallied in a recourse ledger together with the
//! per-level up/down work.
//!
//! The state is single-writer. All query methods are read-only and may run
//! concurrently only while no update is in flight.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::detector::{BlockingCandidate, BlockingDetector, DetectorError, FacilityContext};
use crate::instance::{ClientId, FacilityId, InstanceError, LevelGeometry, MetricInstance};

pub type Level = i32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClusterKind {
    /// Carries the facility opening cost; exactly one per open facility.
    Critical,
    /// Pure connection cost; always a singleton.
    Satellite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(u64);

impl ClusterId {
    pub fn raw(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for ClusterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "K{}", self.0)
    }
}

/// An ordered pair (facility, client set) with a kind and an integer level.
#[derive(Clone, Debug)]
pub struct Cluster {
    facility: FacilityId,
    kind: ClusterKind,
    level: Level,
    clients: BTreeSet<ClientId>,
}

impl Cluster {
    pub fn facility(&self) -> FacilityId {
        self.facility
    }

    pub fn kind(&self) -> ClusterKind {
        self.kind
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn clients(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.clients.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    /// Opening cost (critical only) plus connection costs, summed in client
    /// id order. Panics if `instance` is not the one the state was built on.
    pub fn cost(&self, instance: &MetricInstance) -> f64 {
        let mut cost = match self.kind {
            ClusterKind::Critical => instance
                .opening_cost(self.facility)
                .expect("cluster facility exists in instance"),
            ClusterKind::Satellite => 0.0,
        };
        for &j in &self.clients {
            cost += instance
                .distance(self.facility, j)
                .expect("assigned client is active in instance");
        }
        cost
    }

    /// `cost / |clients|`; positive infinity for an empty cluster.
    pub fn average_cost(&self, instance: &MetricInstance) -> f64 {
        if self.clients.is_empty() {
            f64::INFINITY
        } else {
            self.cost(instance) / self.clients.len() as f64
        }
    }
}

/// Monotone counters for the consistency metrics, plus the per-cluster
/// lifetime up-work tally of every cluster installed by the blocking repair.
#[derive(Clone, Debug, Default)]
pub struct RecourseLedger {
    pub client_recourse: u64,
    pub facility_recourse: u64,
    pub up_work: u64,
    pub down_work: u64,
    /// Every level a cluster ever occupied.
    pub levels_occupied: BTreeSet<Level>,
    pub blocking_births: BTreeMap<ClusterId, BlockingBirth>,
}

impl RecourseLedger {
    pub fn total_recourse(&self) -> u64 {
        self.client_recourse + self.facility_recourse
    }

    pub fn distinct_levels(&self) -> usize {
        self.levels_occupied.len()
    }
}

/// Birth record of a cluster installed by the blocking repair.
#[derive(Clone, Debug)]
pub struct BlockingBirth {
    pub facility: FacilityId,
    pub kind: ClusterKind,
    pub birth_level: Level,
    pub size_at_birth: usize,
    pub opening_cost: f64,
    /// Units of up-work performed on the cluster since its birth.
    pub up_work: u64,
}

/// Which open facility receives a freshly inserted client.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InsertionPolicy {
    /// Nearest open facility.
    #[default]
    NearestOpen,
    /// Lowest-id open facility.
    FirstOpen,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("client {0} is already assigned")]
    DuplicateInsert(ClientId),
    #[error("client {0} is not assigned")]
    UnknownClient(ClientId),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("repair loop exceeded its safety cap after {iterations} iterations")]
    IterationCapExceeded { iterations: u64 },
    #[error("candidate is not a blocking cluster: {0}")]
    NotBlocking(String),
    #[error("cluster {0} neither violates the average cost bound nor is removable")]
    LevelFixNotApplicable(ClusterId),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone, Default)]
struct FacilityEntry {
    critical: Option<ClusterId>,
    by_level: BTreeMap<Level, BTreeSet<ClusterId>>,
    cluster_count: usize,
}

#[derive(Debug, Clone)]
struct ScanCache {
    w_epoch: u64,
    ctx_epoch: u64,
    result: Option<BlockingCandidate>,
}

/// Input cluster for [`ClusteringState::from_parts`].
#[derive(Debug, Clone)]
pub struct RawCluster {
    pub facility: FacilityId,
    pub kind: ClusterKind,
    pub level: Level,
    pub clients: Vec<ClientId>,
}

/// The full maintained solution: clusters, client and facility indices, the
/// blocking detector, and the recourse ledger.
#[derive(Debug, Clone)]
pub struct ClusteringState {
    geometry: LevelGeometry,
    policy: InsertionPolicy,
    facility_count: usize,
    clusters: BTreeMap<ClusterId, Cluster>,
    client_cluster: BTreeMap<ClientId, ClusterId>,
    facility_entries: BTreeMap<FacilityId, FacilityEntry>,
    detector: BlockingDetector,
    ledger: RecourseLedger,
    violations: BTreeSet<(Level, FacilityId, ClusterId)>,
    violation_keys: BTreeMap<ClusterId, (Level, FacilityId)>,
    next_cluster: u64,
    w_epoch: u64,
    ctx_epochs: Vec<u64>,
    scan_cache: Vec<Option<ScanCache>>,
}

impl ClusteringState {
    pub fn new(
        geometry: LevelGeometry,
        facility_count: usize,
        policy: InsertionPolicy,
    ) -> Self {
        let detector = BlockingDetector::new(facility_count, &geometry);
        ClusteringState {
            geometry,
            policy,
            facility_count,
            clusters: BTreeMap::new(),
            client_cluster: BTreeMap::new(),
            facility_entries: BTreeMap::new(),
            detector,
            ledger: RecourseLedger::default(),
            violations: BTreeSet::new(),
            violation_keys: BTreeMap::new(),
            next_cluster: 0,
            w_epoch: 1,
            ctx_epochs: vec![1; facility_count],
            scan_cache: vec![None; facility_count],
        }
    }

    /// Builds a state from explicit clusters, validating only structure:
    /// clients active and assigned once with full coverage of the active set,
    /// satellites singleton, exactly one critical per used facility.
    /// Invariants are deliberately not enforced so that violating states can
    /// be handed to the verification oracles.
    pub fn from_parts(
        instance: &MetricInstance,
        geometry: LevelGeometry,
        policy: InsertionPolicy,
        raw: Vec<RawCluster>,
    ) -> Result<Self, EngineError> {
        let mut state = ClusteringState::new(geometry, instance.facility_count(), policy);
        let mut criticals: BTreeSet<FacilityId> = BTreeSet::new();
        for rc in &raw {
            if rc.facility.index() >= instance.facility_count() {
                return Err(EngineError::InvalidState(format!(
                    "facility {} out of range",
                    rc.facility
                )));
            }
            match rc.kind {
                ClusterKind::Critical => {
                    if !criticals.insert(rc.facility) {
                        return Err(EngineError::InvalidState(format!(
                            "facility {} has two critical clusters",
                            rc.facility
                        )));
                    }
                }
                ClusterKind::Satellite => {
                    if rc.clients.len() != 1 {
                        return Err(EngineError::InvalidState(
                            "satellite cluster must have exactly one client".into(),
                        ));
                    }
                }
            }
        }
        for rc in raw {
            let cid = state.new_cluster(rc.facility, rc.kind, rc.level);
            for j in rc.clients {
                if !instance.is_active(j) {
                    return Err(EngineError::InvalidState(format!("client {j} not active")));
                }
                if state.client_cluster.contains_key(&j) {
                    return Err(EngineError::InvalidState(format!(
                        "client {j} assigned twice"
                    )));
                }
                state.add_new_client(instance, j, cid)?;
            }
        }
        for facility in state.facility_entries.keys() {
            if !criticals.contains(facility) {
                return Err(EngineError::InvalidState(format!(
                    "facility {facility} has clusters but no critical cluster"
                )));
            }
        }
        if state.client_cluster.len() != instance.active_count() {
            return Err(EngineError::InvalidState(format!(
                "{} active clients but {} assigned",
                instance.active_count(),
                state.client_cluster.len()
            )));
        }
        Ok(state)
    }

    pub fn geometry(&self) -> &LevelGeometry {
        &self.geometry
    }

    pub fn detector(&self) -> &BlockingDetector {
        &self.detector
    }

    pub fn recourse(&self) -> &RecourseLedger {
        &self.ledger
    }

    pub fn assigned_count(&self) -> usize {
        self.client_cluster.len()
    }

    pub fn clusters(&self) -> impl Iterator<Item = (ClusterId, &Cluster)> {
        self.clusters.iter().map(|(&id, c)| (id, c))
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    pub fn cluster_of(&self, client: ClientId) -> Option<ClusterId> {
        self.client_cluster.get(&client).copied()
    }

    pub fn level_of(&self, client: ClientId) -> Option<Level> {
        self.cluster_of(client).map(|cid| self.clusters[&cid].level)
    }

    pub fn open_facilities(&self) -> Vec<FacilityId> {
        self.facility_entries.keys().copied().collect()
    }

    pub fn assignment(&self, client: ClientId) -> Result<FacilityId, EngineError> {
        self.cluster_of(client)
            .map(|cid| self.clusters[&cid].facility)
            .ok_or(EngineError::UnknownClient(client))
    }

    /// Sum of cluster costs: opening costs of open facilities plus all
    /// connection costs.
    pub fn solution_cost(&self, instance: &MetricInstance) -> f64 {
        self.clusters.values().map(|c| c.cost(instance)).sum()
    }

    /// Cluster-structure facts the detector needs about one facility.
    pub fn facility_context(
        &self,
        instance: &MetricInstance,
        facility: FacilityId,
    ) -> FacilityContext {
        let entry = self.facility_entries.get(&facility);
        FacilityContext {
            opening_cost: instance.opening_cost(facility).expect("facility in range"),
            critical_level: entry
                .and_then(|e| e.critical)
                .map(|cid| self.clusters[&cid].level),
            min_cluster_level: entry.and_then(|e| e.by_level.keys().next().copied()),
        }
    }

    /// Handles the insertion of an active, unassigned client, then repairs
    /// the invariants.
    pub fn insert(
        &mut self,
        instance: &MetricInstance,
        client: ClientId,
    ) -> Result<(), EngineError> {
        if self.client_cluster.contains_key(&client) {
            return Err(EngineError::DuplicateInsert(client));
        }
        if !instance.is_active(client) {
            return Err(EngineError::Instance(InstanceError::InactiveClient(client.raw())));
        }
        if let Some(facility) = self.pick_open_facility(instance, client)? {
            let d = instance.distance(facility, client)?;
            let kappa = self.geometry.min_assignment_level(d)?;
            let entry = &self.facility_entries[&facility];
            let critical = entry.critical.ok_or_else(|| {
                EngineError::InvalidState(format!("open facility {facility} has no critical"))
            })?;
            let critical_level = self.clusters[&critical].level;
            self.ledger.client_recourse += 1;
            if kappa <= critical_level {
                self.add_new_client(instance, client, critical)?;
            } else {
                let cid = self.new_cluster(facility, ClusterKind::Satellite, kappa);
                self.add_new_client(instance, client, cid)?;
            }
        } else {
            // First client: open the facility minimizing d + f.
            let mut best: Option<(f64, FacilityId)> = None;
            for facility in instance.facilities() {
                let score =
                    instance.distance(facility, client)? + instance.opening_cost(facility)?;
                if best.is_none_or(|(s, _)| score < s) {
                    best = Some((score, facility));
                }
            }
            let (score, facility) =
                best.ok_or_else(|| EngineError::InvalidState("no facilities".into()))?;
            let level = self.geometry.min_assignment_level(score)?;
            self.ledger.facility_recourse += 1;
            self.ledger.client_recourse += 1;
            let cid = self.new_cluster(facility, ClusterKind::Critical, level);
            self.add_new_client(instance, client, cid)?;
        }
        self.fix_clustering(instance)
    }

    /// Handles the deletion of an assigned client, then repairs the
    /// invariants. The client must still be active in the instance;
    /// tombstone it only after this returns.
    pub fn delete(
        &mut self,
        instance: &MetricInstance,
        client: ClientId,
    ) -> Result<(), EngineError> {
        let cid = self
            .cluster_of(client)
            .ok_or(EngineError::UnknownClient(client))?;
        self.detach_client(instance, client, cid)?;
        let cluster = &self.clusters[&cid];
        if cluster.is_empty() && cluster.kind == ClusterKind::Satellite {
            // Empty satellites are removed eagerly; a satellite always has a
            // critical sibling, so this cannot close the facility.
            let (_, closed) = self.retire_cluster(cid);
            if closed {
                self.ledger.facility_recourse += 1;
            }
        }
        self.fix_clustering(instance)
    }

    fn pick_open_facility(
        &self,
        instance: &MetricInstance,
        client: ClientId,
    ) -> Result<Option<FacilityId>, EngineError> {
        match self.policy {
            InsertionPolicy::FirstOpen => {
                Ok(self.facility_entries.keys().next().copied())
            }
            InsertionPolicy::NearestOpen => {
                let mut best: Option<(f64, FacilityId)> = None;
                for &facility in self.facility_entries.keys() {
                    let d = instance.distance(facility, client)?;
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, facility));
                    }
                }
                Ok(best.map(|(_, f)| f))
            }
        }
    }

    /// Repair loop: as long as a blocking cluster exists, install the one at
    /// the lowest level (ties to the lowest facility id); otherwise lift the
    /// first cluster violating the average cost bound. Stops when neither
    /// violation remains.
    pub fn fix_clustering(&mut self, instance: &MetricInstance) -> Result<(), EngineError> {
        let mut iterations: u64 = 0;
        loop {
            let cap = 64
                * (self.client_cluster.len() as u64 + 1)
                * (self.ledger.levels_occupied.len() as u64 + 1);
            iterations += 1;
            if iterations > cap {
                return Err(EngineError::IterationCapExceeded { iterations });
            }
            if let Some(candidate) = self.scan_blocking(instance) {
                self.apply_blocking(instance, &candidate)?;
                continue;
            }
            if let Some(&(_, _, cid)) = self.violations.iter().next() {
                self.fix_level_unchecked(instance, cid)?;
                continue;
            }
            return Ok(());
        }
    }

    /// Installs a candidate after checking it really is a blocking cluster
    /// at its level under bucketized distances.
    pub fn fix_blocking(
        &mut self,
        instance: &MetricInstance,
        candidate: &BlockingCandidate,
    ) -> Result<(), EngineError> {
        self.validate_blocking(instance, candidate)?;
        self.apply_blocking(instance, candidate)
    }

    fn validate_blocking(
        &self,
        instance: &MetricInstance,
        candidate: &BlockingCandidate,
    ) -> Result<(), EngineError> {
        let k = candidate.level;
        let mu = self.geometry.mu();
        if candidate.clients.is_empty() {
            return Err(EngineError::NotBlocking("empty client set".into()));
        }
        if candidate.kind == ClusterKind::Satellite && candidate.clients.len() != 1 {
            return Err(EngineError::NotBlocking("satellite candidate must be a singleton".into()));
        }
        let mut seen = BTreeSet::new();
        let mut weight = 0.0f64;
        for &j in &candidate.clients {
            if !seen.insert(j) {
                return Err(EngineError::NotBlocking(format!("client {j} listed twice")));
            }
            let level = self
                .level_of(j)
                .ok_or_else(|| EngineError::NotBlocking(format!("client {j} unassigned")))?;
            if level <= k {
                return Err(EngineError::NotBlocking(format!(
                    "client {j} is at level {level}, not above {k}"
                )));
            }
            let d = instance.distance(candidate.facility, j)?;
            let bucket = self.geometry.distance_bucket(d)?;
            if bucket > k - mu {
                return Err(EngineError::NotBlocking(format!(
                    "client {j} is too far for level {k}"
                )));
            }
            weight += self.geometry.threshold(bucket);
        }
        let entry = self.facility_entries.get(&candidate.facility);
        let opening_cost = match candidate.kind {
            ClusterKind::Critical => {
                let min_level = entry.and_then(|e| e.by_level.keys().next().copied());
                if let Some(ml) = min_level {
                    if k > ml {
                        return Err(EngineError::NotBlocking(format!(
                            "critical candidate above existing cluster level {ml}"
                        )));
                    }
                }
                instance.opening_cost(candidate.facility)?
            }
            ClusterKind::Satellite => {
                let critical_level = entry
                    .and_then(|e| e.critical)
                    .map(|cid| self.clusters[&cid].level);
                match critical_level {
                    Some(cl) if cl <= k => {}
                    _ => {
                        return Err(EngineError::NotBlocking(
                            "satellite candidate without a critical cluster at or below its level"
                                .into(),
                        ))
                    }
                }
                0.0
            }
        };
        let threshold = self.geometry.threshold(k - mu);
        if opening_cost + weight >= threshold * candidate.clients.len() as f64 {
            return Err(EngineError::NotBlocking(format!(
                "bucketized average cost not below {threshold}"
            )));
        }
        Ok(())
    }

    fn apply_blocking(
        &mut self,
        instance: &MetricInstance,
        candidate: &BlockingCandidate,
    ) -> Result<(), EngineError> {
        let facility = candidate.facility;
        let k = candidate.level;
        if !self.facility_entries.contains_key(&facility) {
            self.ledger.facility_recourse += 1;
        }
        let old_critical = if candidate.kind == ClusterKind::Critical {
            self.facility_entries.get(&facility).and_then(|e| e.critical)
        } else {
            None
        };
        let cid = self.new_cluster(facility, candidate.kind, k);
        for &j in &candidate.clients {
            let from = self.client_cluster.get(&j).copied().ok_or_else(|| {
                EngineError::InvalidState(format!("blocking client {j} unassigned"))
            })?;
            let old_level = self.clusters[&from].level;
            debug_assert!(old_level > k);
            self.ledger.client_recourse += 1;
            self.ledger.down_work += (old_level - k) as u64;
            self.transfer_client(instance, j, from, cid)?;
            if self.clusters[&from].is_empty() {
                match self.clusters[&from].kind {
                    ClusterKind::Satellite => {
                        let (_, closed) = self.retire_cluster(from);
                        if closed {
                            self.ledger.facility_recourse += 1;
                        }
                    }
                    // An emptied critical keeps its slot (infinite average
                    // cost) and is lifted or removed by the level repair,
                    // unless it is the critical being replaced below.
                    ClusterKind::Critical => {}
                }
            }
        }
        if let Some(oc) = old_critical {
            // The replaced critical cluster dissolves into singleton
            // satellites at its own level: same facility, same level, so no
            // recourse and no detector change.
            let level = self.clusters[&oc].level;
            let members: Vec<ClientId> = self.clusters[&oc].clients.iter().copied().collect();
            for j in members {
                let sid = self.new_cluster(facility, ClusterKind::Satellite, level);
                self.transfer_client(instance, j, oc, sid)?;
            }
            let (_, closed) = self.retire_cluster(oc);
            debug_assert!(!closed, "new cluster keeps the facility open");
        }
        self.ledger.blocking_births.insert(
            cid,
            BlockingBirth {
                facility,
                kind: candidate.kind,
                birth_level: k,
                size_at_birth: candidate.clients.len(),
                opening_cost: instance.opening_cost(facility)?,
                up_work: 0,
            },
        );
        Ok(())
    }

    /// Lifts a cluster that violates the average cost bound (or removes it
    /// in the empty corner case).
    pub fn fix_level(
        &mut self,
        instance: &MetricInstance,
        cid: ClusterId,
    ) -> Result<(), EngineError> {
        let cluster = self
            .clusters
            .get(&cid)
            .ok_or_else(|| EngineError::InvalidState(format!("no cluster {cid}")))?;
        let alone = self.facility_entries[&cluster.facility].cluster_count == 1;
        let corner = alone && cluster.is_empty();
        if !corner && !self.violates(instance, cid) {
            return Err(EngineError::LevelFixNotApplicable(cid));
        }
        self.fix_level_unchecked(instance, cid)
    }

    fn fix_level_unchecked(
        &mut self,
        instance: &MetricInstance,
        cid: ClusterId,
    ) -> Result<(), EngineError> {
        let (facility, level, kind) = {
            let c = &self.clusters[&cid];
            (c.facility, c.level, c.kind)
        };
        let alone = self.facility_entries[&facility].cluster_count == 1;
        if alone && self.clusters[&cid].is_empty() {
            let (_, closed) = self.retire_cluster(cid);
            debug_assert!(closed);
            self.ledger.facility_recourse += 1;
            return Ok(());
        }
        if kind == ClusterKind::Critical {
            // Absorb the facility's satellites at this level: same facility,
            // same level, so no recourse and no detector change.
            let siblings: Vec<ClusterId> = self.facility_entries[&facility]
                .by_level
                .get(&level)
                .map(|set| set.iter().copied().filter(|&s| s != cid).collect())
                .unwrap_or_default();
            for sid in siblings {
                debug_assert_eq!(self.clusters[&sid].kind, ClusterKind::Satellite);
                let members: Vec<ClientId> =
                    self.clusters[&sid].clients.iter().copied().collect();
                for j in members {
                    self.transfer_client(instance, j, sid, cid)?;
                }
                let (_, closed) = self.retire_cluster(sid);
                debug_assert!(!closed);
            }
        }
        if self.violates(instance, cid) {
            let size = self.clusters[&cid].clients.len() as u64;
            self.ledger.up_work += size;
            if let Some(birth) = self.ledger.blocking_births.get_mut(&cid) {
                birth.up_work += size;
            }
            self.set_cluster_level(instance, cid, level + 1)?;
        }
        Ok(())
    }

    // ---- internal bookkeeping ------------------------------------------

    fn violates(&self, instance: &MetricInstance, cid: ClusterId) -> bool {
        let cluster = &self.clusters[&cid];
        let threshold = self.geometry.threshold(cluster.level);
        // Cross-multiplied form of cost_avg >= threshold; an empty cluster
        // compares cost >= 0 and therefore always violates.
        cluster.cost(instance) >= threshold * cluster.clients.len() as f64
    }

    fn refresh_violation(&mut self, instance: &MetricInstance, cid: ClusterId) {
        if let Some((level, facility)) = self.violation_keys.remove(&cid) {
            self.violations.remove(&(level, facility, cid));
        }
        if let Some(cluster) = self.clusters.get(&cid) {
            let (level, facility) = (cluster.level, cluster.facility);
            if self.violates(instance, cid) {
                self.violations.insert((level, facility, cid));
                self.violation_keys.insert(cid, (level, facility));
            }
        }
    }

    fn new_cluster(&mut self, facility: FacilityId, kind: ClusterKind, level: Level) -> ClusterId {
        let cid = ClusterId(self.next_cluster);
        self.next_cluster += 1;
        self.clusters.insert(
            cid,
            Cluster { facility, kind, level, clients: BTreeSet::new() },
        );
        let entry = self.facility_entries.entry(facility).or_default();
        entry.by_level.entry(level).or_default().insert(cid);
        entry.cluster_count += 1;
        if kind == ClusterKind::Critical {
            entry.critical = Some(cid);
        }
        self.ledger.levels_occupied.insert(level);
        self.bump_ctx(facility);
        // Freshly created clusters are empty and thus violating until filled.
        self.violations.insert((level, facility, cid));
        self.violation_keys.insert(cid, (level, facility));
        cid
    }

    /// Removes an empty cluster; returns whether its facility closed.
    fn retire_cluster(&mut self, cid: ClusterId) -> (FacilityId, bool) {
        let cluster = self.clusters.remove(&cid).expect("cluster exists");
        debug_assert!(cluster.clients.is_empty(), "only empty clusters are retired");
        if let Some((level, facility)) = self.violation_keys.remove(&cid) {
            self.violations.remove(&(level, facility, cid));
        }
        let entry = self.facility_entries.get_mut(&cluster.facility).expect("facility open");
        if let Some(set) = entry.by_level.get_mut(&cluster.level) {
            set.remove(&cid);
            if set.is_empty() {
                entry.by_level.remove(&cluster.level);
            }
        }
        entry.cluster_count -= 1;
        if entry.critical == Some(cid) {
            entry.critical = None;
        }
        let closed = entry.cluster_count == 0;
        if closed {
            self.facility_entries.remove(&cluster.facility);
        }
        self.bump_ctx(cluster.facility);
        (cluster.facility, closed)
    }

    fn add_new_client(
        &mut self,
        instance: &MetricInstance,
        client: ClientId,
        cid: ClusterId,
    ) -> Result<(), EngineError> {
        let level = self.clusters[&cid].level;
        self.clusters.get_mut(&cid).unwrap().clients.insert(client);
        self.client_cluster.insert(client, cid);
        self.detector
            .on_level_change(instance, &self.geometry, client, None, Some(level))?;
        self.w_epoch += 1;
        self.refresh_violation(instance, cid);
        Ok(())
    }

    fn detach_client(
        &mut self,
        instance: &MetricInstance,
        client: ClientId,
        cid: ClusterId,
    ) -> Result<(), EngineError> {
        let level = self.clusters[&cid].level;
        self.clusters.get_mut(&cid).unwrap().clients.remove(&client);
        self.client_cluster.remove(&client);
        self.detector
            .on_level_change(instance, &self.geometry, client, Some(level), None)?;
        self.w_epoch += 1;
        self.refresh_violation(instance, cid);
        Ok(())
    }

    fn transfer_client(
        &mut self,
        instance: &MetricInstance,
        client: ClientId,
        from: ClusterId,
        to: ClusterId,
    ) -> Result<(), EngineError> {
        let from_level = self.clusters[&from].level;
        let to_level = self.clusters[&to].level;
        self.clusters.get_mut(&from).unwrap().clients.remove(&client);
        self.clusters.get_mut(&to).unwrap().clients.insert(client);
        self.client_cluster.insert(client, to);
        if from_level != to_level {
            self.detector.on_level_change(
                instance,
                &self.geometry,
                client,
                Some(from_level),
                Some(to_level),
            )?;
            self.w_epoch += 1;
        }
        self.refresh_violation(instance, from);
        self.refresh_violation(instance, to);
        Ok(())
    }

    fn set_cluster_level(
        &mut self,
        instance: &MetricInstance,
        cid: ClusterId,
        new_level: Level,
    ) -> Result<(), EngineError> {
        let (facility, old_level) = {
            let c = &self.clusters[&cid];
            (c.facility, c.level)
        };
        if old_level == new_level {
            return Ok(());
        }
        let members: Vec<ClientId> = self.clusters[&cid].clients.iter().copied().collect();
        for &j in &members {
            self.detector.on_level_change(
                instance,
                &self.geometry,
                j,
                Some(old_level),
                Some(new_level),
            )?;
        }
        if !members.is_empty() {
            self.w_epoch += 1;
        }
        let entry = self.facility_entries.get_mut(&facility).expect("facility open");
        if let Some(set) = entry.by_level.get_mut(&old_level) {
            set.remove(&cid);
            if set.is_empty() {
                entry.by_level.remove(&old_level);
            }
        }
        entry.by_level.entry(new_level).or_default().insert(cid);
        self.clusters.get_mut(&cid).unwrap().level = new_level;
        self.ledger.levels_occupied.insert(new_level);
        self.bump_ctx(facility);
        self.refresh_violation(instance, cid);
        Ok(())
    }

    fn bump_ctx(&mut self, facility: FacilityId) {
        self.ctx_epochs[facility.index()] += 1;
    }

    /// Lowest-level blocking cluster over all facilities, with per-facility
    /// memoization keyed by the detector and cluster-structure epochs.
    fn scan_blocking(&mut self, instance: &MetricInstance) -> Option<BlockingCandidate> {
        let mut best: Option<BlockingCandidate> = None;
        for fi in 0..self.facility_count {
            let facility = FacilityId::new(fi as u32);
            let cached = match &self.scan_cache[fi] {
                Some(entry)
                    if entry.w_epoch == self.w_epoch
                        && entry.ctx_epoch == self.ctx_epochs[fi] =>
                {
                    entry.result.clone()
                }
                _ => {
                    let ctx = self.facility_context(instance, facility);
                    let result = self.detector.min_blocking_level(&self.geometry, facility, &ctx);
                    self.scan_cache[fi] = Some(ScanCache {
                        w_epoch: self.w_epoch,
                        ctx_epoch: self.ctx_epochs[fi],
                        result: result.clone(),
                    });
                    result
                }
            };
            if let Some(candidate) = cached {
                if best.as_ref().is_none_or(|b| candidate.level < b.level) {
                    best = Some(candidate);
                }
            }
        }
        best
    }
}
