//! Facility-location instances: facilities with opening costs, a dynamic
//! client registry, a strictly positive distance oracle, and the exponential
//! level geometry shared by the clustering engine and every oracle.
//!
//! Two distance backings are supported: an explicit per-client distance
//! column (small verification instances) and on-the-fly L2 distances from
//! point embeddings with an additive offset (benchmark instances).
//!
//! The instance is immutable after construction except for the client
//! registry, which has a single writer. Deleted clients are tombstoned and
//! their ids are never reused, so update traces stay replayable.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("unknown facility id {0}")]
    UnknownFacility(u32),
    #[error("unknown client id {0}")]
    UnknownClient(u64),
    #[error("client {0} is not active")]
    InactiveClient(u64),
    #[error("distance involving facility {facility} is not strictly positive ({value})")]
    NonPositiveDistance { facility: u32, value: f64 },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("opening cost of facility {0} must be finite and nonnegative")]
    BadOpeningCost(u32),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("mu must be at least 1, got {0}")]
    BadMu(i32),
    #[error("level computation requires a positive finite distance, got {0}")]
    BadDistance(f64),
    #[error("operation is not supported by this distance backing")]
    WrongBacking,
}

/// Dense facility identifier in `[0, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FacilityId(u32);

impl FacilityId {
    pub fn new(raw: u32) -> Self {
        FacilityId(raw)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Display for FacilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

/// Client identifier, unique over the lifetime of a run. Ids of deleted
/// clients are tombstoned, never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClientId(u64);

impl ClientId {
    pub fn new(raw: u64) -> Self {
        ClientId(raw)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Exponential level geometry with base `b = 1 + epsilon`.
///
/// Level thresholds are powers `b^k`. A distance `d` falls into the unique
/// bucket `x` with `b^(x-1) <= d < b^x`, and the minimum admissible level for
/// assigning a client at distance `d` is `x + mu`. Powers are taken from a
/// table built by repeated multiplication anchored at `b^0 = 1`, never from
/// `log`/`pow`, so the half-open bucket boundaries are deterministic: a
/// distance exactly equal to `b^x` lands in bucket `x + 1`.
#[derive(Clone, Debug)]
pub struct LevelGeometry {
    epsilon: f64,
    mu: i32,
    base: f64,
    radius: i64,
    table: Arc<[f64]>,
}

/// Widest power table we are willing to precompute; for bases this close to 1
/// the extreme exponents are reached by stepping beyond the table edge.
const MAX_TABLE_RADIUS: usize = 1 << 18;

impl LevelGeometry {
    pub fn new(epsilon: f64, mu: i32) -> Result<Self, InstanceError> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(InstanceError::BadEpsilon(epsilon));
        }
        if mu < 1 {
            return Err(InstanceError::BadMu(mu));
        }
        let base = 1.0 + epsilon;
        // 745 > |ln(min subnormal)| so the table spans all of f64 when it fits.
        let radius = ((745.0 / base.ln()).ceil() as usize + 2).clamp(128, MAX_TABLE_RADIUS);
        let mut table = vec![0.0f64; 2 * radius + 1];
        table[radius] = 1.0;
        for i in radius + 1..table.len() {
            table[i] = table[i - 1] * base;
        }
        for i in (0..radius).rev() {
            table[i] = table[i + 1] / base;
        }
        Ok(LevelGeometry {
            epsilon,
            mu,
            base,
            radius: radius as i64,
            table: table.into(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mu(&self) -> i32 {
        self.mu
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// True iff this parameterization carries the proven invariant-level
    /// guarantees (`epsilon = 1`, `mu >= 3`).
    pub fn proven_regime(&self) -> bool {
        self.epsilon == 1.0 && self.mu >= 3
    }

    /// The level threshold `b^k`.
    pub fn threshold(&self, level: i32) -> f64 {
        let idx = level as i64 + self.radius;
        if idx >= 0 && (idx as usize) < self.table.len() {
            return self.table[idx as usize];
        }
        if idx < 0 {
            let mut v = self.table[0];
            let mut steps = -idx;
            while steps > 0 && v > 0.0 {
                v /= self.base;
                steps -= 1;
            }
            v
        } else {
            let mut v = self.table[self.table.len() - 1];
            let mut steps = idx - (self.table.len() as i64 - 1);
            while steps > 0 && v.is_finite() {
                v *= self.base;
                steps -= 1;
            }
            v
        }
    }

    /// The unique bucket `x` with `b^(x-1) <= d < b^x`.
    pub fn distance_bucket(&self, d: f64) -> Result<i32, InstanceError> {
        if !d.is_finite() || d <= 0.0 {
            return Err(InstanceError::BadDistance(d));
        }
        // First table index whose power exceeds d.
        let i = self.table.partition_point(|&v| v <= d);
        if i == 0 {
            // d below the bottom table entry: step further down.
            let mut x = -self.radius;
            let mut v = self.table[0];
            while v / self.base > d {
                v /= self.base;
                x -= 1;
            }
            Ok(x as i32)
        } else if i == self.table.len() {
            // d at or above the top table entry: step further up.
            let mut x = self.radius + 1;
            let mut v = self.table[self.table.len() - 1] * self.base;
            while v <= d {
                v *= self.base;
                x += 1;
            }
            Ok(x as i32)
        } else {
            Ok((i as i64 - self.radius) as i32)
        }
    }

    /// Minimum admissible level for a client at distance `d`: the unique
    /// integer `kappa` with `b^(kappa-mu-1) <= d < b^(kappa-mu)`.
    pub fn min_assignment_level(&self, d: f64) -> Result<i32, InstanceError> {
        Ok(self.distance_bucket(d)? + self.mu)
    }
}

#[derive(Debug, Clone)]
enum ClientData {
    /// One distance per facility, indexed by facility id.
    Column(Vec<f64>),
    /// Point embedding; distances are L2 plus the instance offset.
    Point(Vec<f64>),
}

#[derive(Debug, Clone)]
struct ClientRecord {
    data: ClientData,
    active: bool,
}

#[derive(Debug, Clone)]
enum DistanceBacking {
    Matrix,
    Points { facility_points: Vec<Vec<f64>>, dim: usize, offset: f64 },
}

/// A facility location instance: `m` facilities with opening costs, a
/// dynamic set of clients, and a deterministic positive distance oracle.
#[derive(Debug, Clone)]
pub struct MetricInstance {
    opening_costs: Vec<f64>,
    backing: DistanceBacking,
    clients: Vec<ClientRecord>,
    active: BTreeSet<ClientId>,
}

impl MetricInstance {
    /// Instance backed by explicit distance columns supplied per client.
    pub fn with_matrix(opening_costs: Vec<f64>) -> Result<Self, InstanceError> {
        validate_costs(&opening_costs)?;
        Ok(MetricInstance {
            opening_costs,
            backing: DistanceBacking::Matrix,
            clients: Vec::new(),
            active: BTreeSet::new(),
        })
    }

    /// Instance backed by point embeddings; every distance is the L2 distance
    /// plus `offset` (the offset keeps coincident points at positive distance).
    pub fn with_points(
        facility_points: Vec<Vec<f64>>,
        opening_costs: Vec<f64>,
        offset: f64,
    ) -> Result<Self, InstanceError> {
        validate_costs(&opening_costs)?;
        if opening_costs.len() != facility_points.len() {
            return Err(InstanceError::DimensionMismatch {
                expected: facility_points.len(),
                got: opening_costs.len(),
            });
        }
        let dim = facility_points.first().map_or(0, Vec::len);
        for p in &facility_points {
            if p.len() != dim {
                return Err(InstanceError::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        if !offset.is_finite() || offset < 0.0 {
            return Err(InstanceError::BadDistance(offset));
        }
        Ok(MetricInstance {
            opening_costs,
            backing: DistanceBacking::Points { facility_points, dim, offset },
            clients: Vec::new(),
            active: BTreeSet::new(),
        })
    }

    pub fn facility_count(&self) -> usize {
        self.opening_costs.len()
    }

    pub fn facilities(&self) -> impl Iterator<Item = FacilityId> {
        (0..self.opening_costs.len() as u32).map(FacilityId)
    }

    pub fn opening_cost(&self, facility: FacilityId) -> Result<f64, InstanceError> {
        self.opening_costs
            .get(facility.index())
            .copied()
            .ok_or(InstanceError::UnknownFacility(facility.raw()))
    }

    /// Registers and activates a client given its distance column
    /// (matrix backing only). All distances must be strictly positive.
    pub fn add_client_column(&mut self, column: Vec<f64>) -> Result<ClientId, InstanceError> {
        if !matches!(self.backing, DistanceBacking::Matrix) {
            return Err(InstanceError::WrongBacking);
        }
        if column.len() != self.opening_costs.len() {
            return Err(InstanceError::DimensionMismatch {
                expected: self.opening_costs.len(),
                got: column.len(),
            });
        }
        for (i, &d) in column.iter().enumerate() {
            if !d.is_finite() || d <= 0.0 {
                return Err(InstanceError::NonPositiveDistance { facility: i as u32, value: d });
            }
        }
        Ok(self.push_client(ClientData::Column(column)))
    }

    /// Registers and activates a client given its point embedding
    /// (points backing only).
    pub fn add_client_point(&mut self, point: Vec<f64>) -> Result<ClientId, InstanceError> {
        let (dim, offset) = match &self.backing {
            DistanceBacking::Points { dim, offset, .. } => (*dim, *offset),
            DistanceBacking::Matrix => return Err(InstanceError::WrongBacking),
        };
        if point.len() != dim {
            return Err(InstanceError::DimensionMismatch { expected: dim, got: point.len() });
        }
        if let DistanceBacking::Points { facility_points, .. } = &self.backing {
            for (i, fp) in facility_points.iter().enumerate() {
                let d = l2(fp, &point) + offset;
                if !d.is_finite() || d <= 0.0 {
                    return Err(InstanceError::NonPositiveDistance {
                        facility: i as u32,
                        value: d,
                    });
                }
            }
        }
        Ok(self.push_client(ClientData::Point(point)))
    }

    fn push_client(&mut self, data: ClientData) -> ClientId {
        let id = ClientId(self.clients.len() as u64);
        self.clients.push(ClientRecord { data, active: true });
        self.active.insert(id);
        id
    }

    /// Tombstones a client; its id is never reused.
    pub fn deactivate_client(&mut self, client: ClientId) -> Result<(), InstanceError> {
        let record = self
            .clients
            .get_mut(client.index())
            .ok_or(InstanceError::UnknownClient(client.raw()))?;
        if !record.active {
            return Err(InstanceError::InactiveClient(client.raw()));
        }
        record.active = false;
        self.active.remove(&client);
        Ok(())
    }

    pub fn is_active(&self, client: ClientId) -> bool {
        self.clients.get(client.index()).is_some_and(|r| r.active)
    }

    pub fn active_clients(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.active.iter().copied()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// The distance `d(i, j)`. Deterministic: repeated calls return the same
    /// bits. The client must be active.
    pub fn distance(&self, facility: FacilityId, client: ClientId) -> Result<f64, InstanceError> {
        if facility.index() >= self.opening_costs.len() {
            return Err(InstanceError::UnknownFacility(facility.raw()));
        }
        let record = self
            .clients
            .get(client.index())
            .ok_or(InstanceError::UnknownClient(client.raw()))?;
        if !record.active {
            return Err(InstanceError::InactiveClient(client.raw()));
        }
        match (&record.data, &self.backing) {
            (ClientData::Column(col), _) => Ok(col[facility.index()]),
            (ClientData::Point(p), DistanceBacking::Points { facility_points, offset, .. }) => {
                Ok(l2(&facility_points[facility.index()], p) + offset)
            }
            (ClientData::Point(_), DistanceBacking::Matrix) => Err(InstanceError::WrongBacking),
        }
    }
}

fn validate_costs(costs: &[f64]) -> Result<(), InstanceError> {
    for (i, &f) in costs.iter().enumerate() {
        if !f.is_finite() || f < 0.0 {
            return Err(InstanceError::BadOpeningCost(i as u32));
        }
    }
    Ok(())
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
