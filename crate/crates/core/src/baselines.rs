//! Offline reference algorithms.
//!
//! [`static_greedy`] is the round-based greedy: each round opens the cluster
//! with the exact minimum average cost among, per unopened facility, the
//! best prefix of the unassigned clients sorted by distance (opening cost
//! included) and, per opened facility, its nearest unassigned client as a
//! singleton. Rerunning it after every update is the expensive offline
//! baseline the dynamic engine is measured against.
//!
//! [`nearest_facility`] simply opens the nearest facility of every client.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::engine::ClusterKind;
use crate::instance::{ClientId, FacilityId, InstanceError, MetricInstance};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("instance has no facilities")]
    NoFacilities,
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// One cluster picked by the greedy, in round order.
#[derive(Debug, Clone)]
pub struct GreedyCluster {
    pub facility: FacilityId,
    pub kind: ClusterKind,
    pub clients: Vec<ClientId>,
    pub average_cost: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BaselineSolution {
    pub assignment: BTreeMap<ClientId, FacilityId>,
    pub open: BTreeSet<FacilityId>,
    pub cost: f64,
    pub clusters: Vec<GreedyCluster>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Candidate {
    /// Best prefix of the facility's unassigned clients: (avg, prefix len).
    Critical(f64, usize),
    /// Nearest unassigned client.
    Satellite(f64),
}

impl Candidate {
    fn average(&self) -> f64 {
        match *self {
            Candidate::Critical(a, _) => a,
            Candidate::Satellite(a) => a,
        }
    }
}

/// Max-heap entry ordered so that `pop` yields the smallest (avg, facility).
#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    average: f64,
    facility: FacilityId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .average
            .total_cmp(&self.average)
            .then_with(|| other.facility.cmp(&self.facility))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct GreedyRun<'a> {
    instance: &'a MetricInstance,
    /// Clients sorted by (distance, id), one list per facility.
    sorted: Vec<Vec<(f64, ClientId)>>,
    assigned: BTreeSet<ClientId>,
    opened: Vec<bool>,
}

impl<'a> GreedyRun<'a> {
    /// Current best candidate for a facility, or None if no unassigned
    /// client remains. For a fixed size the nearest unassigned clients
    /// minimize the average, so only prefixes are inspected; ties prefer the
    /// smaller cluster.
    fn best_candidate(&self, facility: FacilityId) -> Result<Option<Candidate>, BaselineError> {
        let list = &self.sorted[facility.index()];
        if self.opened[facility.index()] {
            for &(d, j) in list {
                if !self.assigned.contains(&j) {
                    return Ok(Some(Candidate::Satellite(d)));
                }
            }
            return Ok(None);
        }
        let opening = self.instance.opening_cost(facility)?;
        let mut sum = opening;
        let mut size = 0usize;
        let mut best: Option<(f64, usize)> = None;
        for &(d, j) in list {
            if self.assigned.contains(&j) {
                continue;
            }
            sum += d;
            size += 1;
            let average = sum / size as f64;
            if best.is_none_or(|(a, _)| average < a) {
                best = Some((average, size));
            }
        }
        Ok(best.map(|(a, s)| Candidate::Critical(a, s)))
    }

    fn take(&mut self, facility: FacilityId, candidate: Candidate) -> GreedyCluster {
        let list = &self.sorted[facility.index()];
        let mut clients = Vec::new();
        match candidate {
            Candidate::Critical(_, size) => {
                for &(_, j) in list {
                    if clients.len() == size {
                        break;
                    }
                    if !self.assigned.contains(&j) {
                        clients.push(j);
                    }
                }
                self.opened[facility.index()] = true;
            }
            Candidate::Satellite(_) => {
                for &(_, j) in list {
                    if !self.assigned.contains(&j) {
                        clients.push(j);
                        break;
                    }
                }
            }
        }
        for &j in &clients {
            self.assigned.insert(j);
        }
        GreedyCluster {
            facility,
            kind: match candidate {
                Candidate::Critical(..) => ClusterKind::Critical,
                Candidate::Satellite(_) => ClusterKind::Satellite,
            },
            clients,
            average_cost: candidate.average(),
        }
    }
}

/// Exact-minimum greedy over the active clients. Uses a lazily re-evaluated
/// heap: every candidate average only grows as the unassigned pool shrinks,
/// so a popped entry whose recomputed average still equals its key is the
/// global minimum (opening a facility resets its candidate, which is pushed
/// fresh at that point).
pub fn static_greedy(instance: &MetricInstance) -> Result<BaselineSolution, BaselineError> {
    let m = instance.facility_count();
    if m == 0 {
        return Err(BaselineError::NoFacilities);
    }
    let clients: Vec<ClientId> = instance.active_clients().collect();
    let mut run = GreedyRun {
        instance,
        sorted: Vec::with_capacity(m),
        assigned: BTreeSet::new(),
        opened: vec![false; m],
    };
    for facility in instance.facilities() {
        let mut list: Vec<(f64, ClientId)> = Vec::with_capacity(clients.len());
        for &j in &clients {
            list.push((instance.distance(facility, j)?, j));
        }
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        run.sorted.push(list);
    }

    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    for facility in instance.facilities() {
        if let Some(c) = run.best_candidate(facility)? {
            heap.push(HeapEntry { average: c.average(), facility });
        }
    }

    let mut solution = BaselineSolution::default();
    while run.assigned.len() < clients.len() {
        let entry = heap.pop().expect("unassigned clients imply candidates");
        let Some(candidate) = run.best_candidate(entry.facility)? else {
            continue;
        };
        if candidate.average().total_cmp(&entry.average) == Ordering::Greater {
            // Stale; re-queue with the refreshed average.
            heap.push(HeapEntry { average: candidate.average(), facility: entry.facility });
            continue;
        }
        let cluster = run.take(entry.facility, candidate);
        for &j in &cluster.clients {
            solution.assignment.insert(j, cluster.facility);
        }
        solution.open.insert(cluster.facility);
        solution.clusters.push(cluster);
        // The facility's next candidate (satellites from now on).
        if let Some(c) = run.best_candidate(entry.facility)? {
            heap.push(HeapEntry { average: c.average(), facility: entry.facility });
        }
    }

    solution.cost = solution_cost(instance, &solution)?;
    Ok(solution)
}

/// Opens exactly the facilities that are nearest to at least one client and
/// assigns every client to its nearest facility (ties to the lower id).
pub fn nearest_facility(instance: &MetricInstance) -> Result<BaselineSolution, BaselineError> {
    if instance.facility_count() == 0 {
        return Err(BaselineError::NoFacilities);
    }
    let mut solution = BaselineSolution::default();
    for j in instance.active_clients() {
        let mut best: Option<(f64, FacilityId)> = None;
        for facility in instance.facilities() {
            let d = instance.distance(facility, j)?;
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, facility));
            }
        }
        let (_, facility) = best.expect("at least one facility");
        solution.assignment.insert(j, facility);
        solution.open.insert(facility);
    }
    solution.cost = solution_cost(instance, &solution)?;
    Ok(solution)
}

fn solution_cost(
    instance: &MetricInstance,
    solution: &BaselineSolution,
) -> Result<f64, BaselineError> {
    let mut cost = 0.0f64;
    for &facility in &solution.open {
        cost += instance.opening_cost(facility)?;
    }
    for (&j, &facility) in &solution.assignment {
        cost += instance.distance(facility, j)?;
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> (MetricInstance, Vec<ClientId>) {
        let mut inst = MetricInstance::with_matrix(vec![3.0, 10.0]).unwrap();
        let j1 = inst.add_client_column(vec![1.0, 5.0]).unwrap();
        let j2 = inst.add_client_column(vec![2.0, 1.0]).unwrap();
        (inst, vec![j1, j2])
    }

    #[test]
    fn greedy_picks_minimum_average_cluster() {
        let (inst, ids) = two_by_two();
        let sol = static_greedy(&inst).unwrap();
        // Candidate averages in round 1: 4, 3, 5, 8, 11, 15 over all
        // facility/subset pairs; the winner is (F1, {j1, j2}) at 3.
        assert_eq!(sol.clusters.len(), 1);
        assert_eq!(sol.clusters[0].facility, FacilityId::new(0));
        assert_eq!(sol.clusters[0].kind, ClusterKind::Critical);
        assert_eq!(sol.clusters[0].clients, ids);
        assert_eq!(sol.clusters[0].average_cost, 3.0);
        assert_eq!(sol.cost, 6.0);
    }

    #[test]
    fn greedy_single_client() {
        let mut inst = MetricInstance::with_matrix(vec![7.0]).unwrap();
        let j = inst.add_client_column(vec![2.0]).unwrap();
        let sol = static_greedy(&inst).unwrap();
        assert_eq!(sol.cost, 9.0);
        assert_eq!(sol.assignment[&j], FacilityId::new(0));
    }

    #[test]
    fn greedy_zero_clients() {
        let inst = MetricInstance::with_matrix(vec![7.0]).unwrap();
        let sol = static_greedy(&inst).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert!(sol.open.is_empty());
        assert!(static_greedy(&MetricInstance::with_matrix(vec![]).unwrap()).is_err());
    }

    #[test]
    fn greedy_uses_satellites_after_opening() {
        // Expensive facilities force one opening, later clients join as
        // singleton satellites when that is cheapest.
        let mut inst = MetricInstance::with_matrix(vec![100.0, 100.0]).unwrap();
        for d in [1.0, 2.0, 3.0] {
            inst.add_client_column(vec![d, d + 50.0]).unwrap();
        }
        let sol = static_greedy(&inst).unwrap();
        assert_eq!(sol.open.len(), 1);
        assert_eq!(sol.cost, 106.0);
        assert!(sol.clusters.iter().any(|c| c.kind == ClusterKind::Satellite)
            || sol.clusters[0].clients.len() == 3);
    }

    #[test]
    fn nearest_facility_examples() {
        let (inst, ids) = two_by_two();
        let sol = nearest_facility(&inst).unwrap();
        assert_eq!(sol.assignment[&ids[0]], FacilityId::new(0));
        assert_eq!(sol.assignment[&ids[1]], FacilityId::new(1));
        assert_eq!(sol.open.len(), 2);
        assert_eq!(sol.cost, 3.0 + 10.0 + 1.0 + 1.0);

        // Two clients sharing a nearest facility: one opening cost.
        let mut inst = MetricInstance::with_matrix(vec![3.0, 10.0]).unwrap();
        inst.add_client_column(vec![1.0, 5.0]).unwrap();
        inst.add_client_column(vec![2.0, 6.0]).unwrap();
        let sol = nearest_facility(&inst).unwrap();
        assert_eq!(sol.open.len(), 1);
        assert_eq!(sol.cost, 6.0);
    }
}
