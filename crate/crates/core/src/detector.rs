//! Incremental blocking-cluster detection.
//!
//! For every facility we maintain a sparse counter matrix `W[x, y]`: the
//! number of active clients whose distance to the facility falls in the
//! bucket `[b^(x-1), b^x)` and whose cluster currently sits at level `y`.
//! Alongside it we keep, per (facility, level), the clients at that level
//! ordered by distance; concatenating the levels above `k` yields the
//! candidate sequence from which blocking clusters are extracted as
//! prefixes.
//!
//! Detection works on bucketized distances: each counted client contributes
//! the upper bound `b^x` of its bucket. A cluster reported blocking under
//! these rounded-up distances is blocking under the true distances as well;
//! completeness is lost by at most one factor of `b`.
//!
//! All average-cost comparisons are evaluated in the cross-multiplied form
//! `f + sum < threshold * count`, in ascending `(distance, client)` order.
//! The invariant auditor evaluates the same expression in the same order, so
//! the two sides cannot disagree on a boundary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::ClusterKind;
use crate::instance::{ClientId, FacilityId, InstanceError, LevelGeometry, MetricInstance};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("inconsistent level change for client {client}: {detail}")]
    InconsistentUpdate { client: ClientId, detail: String },
    #[error("no blocking cluster at facility {facility}, level {level}")]
    NoBlockingCluster { facility: FacilityId, level: i32 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Cluster-structure facts about one facility that the detector needs to
/// evaluate the candidate-kind conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacilityContext {
    pub opening_cost: f64,
    /// Level of the facility's critical cluster, if the facility is open.
    pub critical_level: Option<i32>,
    /// Minimum level over all clusters of the facility, if open.
    pub min_cluster_level: Option<i32>,
}

impl FacilityContext {
    fn critical_admissible(&self, level: i32) -> bool {
        self.min_cluster_level.is_none_or(|ml| level <= ml)
    }

    fn satellite_admissible(&self, level: i32) -> bool {
        self.critical_level.is_some_and(|cl| cl <= level)
    }
}

/// A blocking cluster found by the detector, ready to be installed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingCandidate {
    pub facility: FacilityId,
    pub kind: ClusterKind,
    pub level: i32,
    /// Prefix of the facility's distance-ordered candidate sequence.
    pub clients: Vec<ClientId>,
}

#[derive(Clone, Copy, Debug)]
struct NeighborEntry {
    distance: f64,
    client: ClientId,
}

impl PartialEq for NeighborEntry {
    fn eq(&self, other: &Self) -> bool {
        self.distance.total_cmp(&other.distance) == Ordering::Equal && self.client == other.client
    }
}

impl Eq for NeighborEntry {}

impl Ord for NeighborEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then_with(|| self.client.cmp(&other.client))
    }
}

impl PartialOrd for NeighborEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Default)]
struct FacilityCounters {
    /// Sparse `W`: (bucket, level) -> client count. Zero entries are absent.
    counts: BTreeMap<(i32, i32), u32>,
    /// Clients per level, ordered by (distance, id).
    by_level: BTreeMap<i32, BTreeSet<NeighborEntry>>,
    total: usize,
}

impl FacilityCounters {
    fn bump(&mut self, bucket: i32, level: i32, entry: NeighborEntry) {
        *self.counts.entry((bucket, level)).or_insert(0) += 1;
        self.by_level.entry(level).or_default().insert(entry);
        self.total += 1;
    }

    fn drop(
        &mut self,
        bucket: i32,
        level: i32,
        entry: NeighborEntry,
    ) -> Result<(), DetectorError> {
        let slot = self.counts.get_mut(&(bucket, level)).ok_or_else(|| {
            DetectorError::InconsistentUpdate {
                client: entry.client,
                detail: format!("no counter at bucket {bucket}, level {level}"),
            }
        })?;
        *slot -= 1;
        if *slot == 0 {
            self.counts.remove(&(bucket, level));
        }
        let set = self.by_level.get_mut(&level).ok_or_else(|| {
            DetectorError::InconsistentUpdate {
                client: entry.client,
                detail: format!("no neighbor list at level {level}"),
            }
        })?;
        if !set.remove(&entry) {
            return Err(DetectorError::InconsistentUpdate {
                client: entry.client,
                detail: format!("client absent from neighbor list at level {level}"),
            });
        }
        if set.is_empty() {
            self.by_level.remove(&level);
        }
        self.total -= 1;
        Ok(())
    }
}

/// Per-facility counter matrices plus sorted neighbor structures.
#[derive(Debug, Clone)]
pub struct BlockingDetector {
    mu: i32,
    facilities: Vec<FacilityCounters>,
}

impl BlockingDetector {
    pub fn new(facility_count: usize, geometry: &LevelGeometry) -> Self {
        BlockingDetector {
            mu: geometry.mu(),
            facilities: vec![FacilityCounters::default(); facility_count],
        }
    }

    /// Mirrors one engine-side event: insertion (`old = None`), deletion
    /// (`new = None`), or a level change. Touches every facility.
    pub fn on_level_change(
        &mut self,
        instance: &MetricInstance,
        geometry: &LevelGeometry,
        client: ClientId,
        old_level: Option<i32>,
        new_level: Option<i32>,
    ) -> Result<(), DetectorError> {
        if old_level.is_none() && new_level.is_none() {
            return Err(DetectorError::InconsistentUpdate {
                client,
                detail: "neither old nor new level given".into(),
            });
        }
        if old_level == new_level {
            return Ok(());
        }
        for fi in 0..self.facilities.len() {
            let facility = FacilityId::new(fi as u32);
            let d = instance.distance(facility, client)?;
            let bucket = geometry.distance_bucket(d)?;
            let entry = NeighborEntry { distance: d, client };
            if let Some(y) = old_level {
                self.facilities[fi].drop(bucket, y, entry)?;
            }
            if let Some(y) = new_level {
                self.facilities[fi].bump(bucket, y, entry);
            }
        }
        Ok(())
    }

    /// Number of counted clients at a facility; equals the number of active
    /// assigned clients whenever the detector is consistent with the engine.
    pub fn client_count(&self, facility: FacilityId) -> usize {
        self.facilities[facility.index()].total
    }

    /// Sum over the sparse counter matrix of one facility. Always equals
    /// [`Self::client_count`]; exposed so conservation can be checked
    /// against the counters themselves.
    pub fn counter_total(&self, facility: FacilityId) -> usize {
        self.facilities[facility.index()]
            .counts
            .values()
            .map(|&n| n as usize)
            .sum()
    }

    /// `W[bucket, level]` for one facility.
    pub fn bucket_count(&self, facility: FacilityId, bucket: i32, level: i32) -> u32 {
        self.facilities[facility.index()]
            .counts
            .get(&(bucket, level))
            .copied()
            .unwrap_or(0)
    }

    /// Whether some prefix (in increasing bucket order) of the counters with
    /// level above `k` has bucketized average cost below `b^(k-mu)`.
    ///
    /// Critical candidates carry the opening cost and require
    /// `k <= min_cluster_level`; satellite candidates are singletons and
    /// require an existing critical cluster at level `<= k`.
    pub fn exists_blocking(
        &self,
        geometry: &LevelGeometry,
        facility: FacilityId,
        k: i32,
        ctx: &FacilityContext,
    ) -> bool {
        let fc = &self.facilities[facility.index()];
        let threshold = geometry.threshold(k - self.mu);
        let satellite_ok = ctx.satellite_admissible(k);
        let critical_ok = ctx.critical_admissible(k);
        if !satellite_ok && !critical_ok {
            return false;
        }
        let mut count: u64 = 0;
        let mut weight = 0.0f64;
        // Entries iterate bucket-major; eligibility caps buckets at k - mu.
        for (&(x, y), &n) in fc.counts.range(..=(k - self.mu, i32::MAX)) {
            if y <= k {
                continue;
            }
            if satellite_ok && x < k - self.mu {
                return true;
            }
            if critical_ok {
                count += n as u64;
                weight += n as f64 * geometry.threshold(x);
                if ctx.opening_cost + weight < threshold * count as f64 {
                    return true;
                }
            }
        }
        false
    }

    /// Extracts a blocking cluster at `(facility, k)`: the shortest prefix of
    /// the distance-ordered eligible clients whose bucketized average cost is
    /// below `b^(k-mu)`. Satellite candidates are preferred when both kinds
    /// are admissible.
    pub fn extract_blocking(
        &self,
        geometry: &LevelGeometry,
        facility: FacilityId,
        k: i32,
        ctx: &FacilityContext,
    ) -> Result<BlockingCandidate, DetectorError> {
        let fc = &self.facilities[facility.index()];
        let mut merged: Vec<(NeighborEntry, i32)> = Vec::new();
        for (_, set) in fc.by_level.range(k + 1..) {
            for entry in set {
                let bucket = geometry.distance_bucket(entry.distance)?;
                if bucket <= k - self.mu {
                    merged.push((*entry, bucket));
                }
            }
        }
        merged.sort_by_key(|&(entry, _)| entry);

        if ctx.satellite_admissible(k) {
            if let Some((entry, _)) = merged.iter().find(|(_, bucket)| *bucket < k - self.mu)
            {
                return Ok(BlockingCandidate {
                    facility,
                    kind: ClusterKind::Satellite,
                    level: k,
                    clients: vec![entry.client],
                });
            }
        }
        if ctx.critical_admissible(k) {
            let threshold = geometry.threshold(k - self.mu);
            let mut weight = 0.0f64;
            for (len, (_, bucket)) in merged.iter().enumerate() {
                weight += geometry.threshold(*bucket);
                if ctx.opening_cost + weight < threshold * (len + 1) as f64 {
                    return Ok(BlockingCandidate {
                        facility,
                        kind: ClusterKind::Critical,
                        level: k,
                        clients: merged[..=len].iter().map(|(e, _)| e.client).collect(),
                    });
                }
            }
        }
        Err(DetectorError::NoBlockingCluster { facility, level: k })
    }

    /// Lowest level at which this facility admits a blocking cluster,
    /// together with the extracted cluster. A fast counter sweep prunes the
    /// level range; every hit is confirmed by the extraction walk.
    pub fn min_blocking_level(
        &self,
        geometry: &LevelGeometry,
        facility: FacilityId,
        ctx: &FacilityContext,
    ) -> Option<BlockingCandidate> {
        let fc = &self.facilities[facility.index()];
        if fc.total == 0 {
            return None;
        }
        let entries: Vec<(i32, i32, u32)> =
            fc.counts.iter().map(|(&(x, y), &n)| (x, y, n)).collect();
        let x_min = entries.first().map(|e| e.0)?;
        let y_max = entries.iter().map(|e| e.1).max()?;
        let k_lo = x_min + self.mu;
        let k_hi = y_max - 1;
        if k_lo > k_hi {
            return None;
        }

        // Removal events per level, sorted by level (entries are x-major).
        let mut removals: Vec<(i32, i32, u32)> = entries.clone();
        removals.sort_by_key(|&(_, y, _)| y);

        let mut loose_count: i64 = 0; // clients with bucket <= k - mu, level > k
        let mut loose_weight = 0.0f64;
        let mut strict_count: i64 = 0; // clients with bucket <= k - mu - 1, level > k
        let (mut pa, mut pb, mut pr) = (0usize, 0usize, 0usize);

        for k in k_lo..=k_hi {
            while pa < entries.len() && entries[pa].0 + self.mu <= k {
                let (x, y, n) = entries[pa];
                if y > x + self.mu {
                    loose_count += n as i64;
                    loose_weight += n as f64 * geometry.threshold(x);
                }
                pa += 1;
            }
            while pb < entries.len() && entries[pb].0 + self.mu < k {
                let (x, y, n) = entries[pb];
                if y > x + self.mu + 1 {
                    strict_count += n as i64;
                }
                pb += 1;
            }
            while pr < removals.len() && removals[pr].1 <= k {
                let (x, y, n) = removals[pr];
                if y > x + self.mu {
                    loose_count -= n as i64;
                    loose_weight -= n as f64 * geometry.threshold(x);
                }
                if y > x + self.mu + 1 {
                    strict_count -= n as i64;
                }
                pr += 1;
            }

            if strict_count > 0 && ctx.satellite_admissible(k) {
                if let Ok(candidate) = self.extract_blocking(geometry, facility, k, ctx) {
                    return Some(candidate);
                }
            }
            if loose_count > 0 && ctx.critical_admissible(k) {
                let threshold = geometry.threshold(k - self.mu);
                // Slack makes the pruning conservative against rounding; the
                // extraction walk is the deciding predicate.
                let bound = threshold * loose_count as f64;
                if ctx.opening_cost + loose_weight < bound + bound.abs() * 1e-9 + 1e-12 {
                    if let Ok(candidate) = self.extract_blocking(geometry, facility, k, ctx) {
                        return Some(candidate);
                    }
                }
            }
        }
        None
    }

    /// Lowest (level, facility) pair admitting a blocking cluster, scanning
    /// levels bottom-up and facilities in id order.
    pub fn scan_all(
        &self,
        geometry: &LevelGeometry,
        contexts: &[FacilityContext],
    ) -> Option<(FacilityId, i32)> {
        assert_eq!(contexts.len(), self.facilities.len());
        let mut best: Option<(i32, FacilityId)> = None;
        for (fi, ctx) in contexts.iter().enumerate() {
            let facility = FacilityId::new(fi as u32);
            if let Some(candidate) = self.min_blocking_level(geometry, facility, ctx) {
                if best.is_none_or(|(k, _)| candidate.level < k) {
                    best = Some((candidate.level, facility));
                }
            }
        }
        best.map(|(k, f)| (f, k))
    }
}
