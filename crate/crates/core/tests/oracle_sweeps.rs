//! Randomized cross-checks between the incremental detector, the exhaustive
//! search oracles, the exact solver, and the offline greedy.

use dynfl_core::baselines::static_greedy;
use dynfl_core::engine::{ClusterKind, ClusteringState, InsertionPolicy, RawCluster};
use dynfl_core::instance::{ClientId, FacilityId, LevelGeometry, MetricInstance};
use dynfl_core::verify::{detector_equivalence, exact_opt};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (MetricInstance, Vec<ClientId>) {
    let costs: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..60.0)).collect();
    let mut inst = MetricInstance::with_matrix(costs).unwrap();
    let mut ids = Vec::new();
    for _ in 0..n {
        let column: Vec<f64> = (0..m).map(|_| rng.gen_range(0.4..40.0)).collect();
        ids.push(inst.add_client_column(column).unwrap());
    }
    (inst, ids)
}

/// Random structurally valid clustering: per facility one critical cluster,
/// extra clients become singleton satellites. Levels are placed loosely
/// around each client's admissible level, so invariant violations (and
/// blocking clusters) occur freely.
fn random_state(
    rng: &mut ChaCha8Rng,
    inst: &MetricInstance,
    ids: &[ClientId],
    geometry: LevelGeometry,
) -> ClusteringState {
    let m = inst.facility_count();
    let mut criticals: Vec<Option<usize>> = vec![None; m];
    let mut raw: Vec<RawCluster> = Vec::new();
    for &j in ids {
        let fi = rng.gen_range(0..m);
        let facility = FacilityId::new(fi as u32);
        let d = inst.distance(facility, j).unwrap();
        let kappa = geometry.min_assignment_level(d).unwrap();
        let level = kappa + rng.gen_range(0..5);
        match criticals[fi] {
            None => {
                criticals[fi] = Some(raw.len());
                raw.push(RawCluster {
                    facility,
                    kind: ClusterKind::Critical,
                    level,
                    clients: vec![j],
                });
            }
            Some(slot) => {
                if rng.gen_bool(0.5) {
                    raw[slot].clients.push(j);
                } else {
                    raw.push(RawCluster {
                        facility,
                        kind: ClusterKind::Satellite,
                        level,
                        clients: vec![j],
                    });
                }
            }
        }
    }
    ClusteringState::from_parts(inst, geometry, InsertionPolicy::NearestOpen, raw).unwrap()
}

#[test]
fn detector_agrees_with_exhaustive_search_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..150 {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(0..=10);
        let (inst, ids) = random_instance(&mut rng, m, n);
        let (eps, mu) = match round % 3 {
            0 => (1.0, 3),
            1 => (0.05, 1),
            _ => (0.5, 2),
        };
        let geometry = LevelGeometry::new(eps, mu).unwrap();
        let state = random_state(&mut rng, &inst, &ids, geometry);
        assert!(
            detector_equivalence(&inst, &state).unwrap(),
            "disagreement in round {round} (eps={eps}, mu={mu})"
        );
    }
}

#[test]
fn exact_opt_enumerates_correctly() {
    let mut inst = MetricInstance::with_matrix(vec![3.0, 10.0]).unwrap();
    inst.add_client_column(vec![1.0, 5.0]).unwrap();
    inst.add_client_column(vec![2.0, 1.0]).unwrap();
    let opt = exact_opt(&inst).unwrap();
    // Subsets: {F0} = 6, {F1} = 16, {F0, F1} = 15.
    assert_eq!(opt.cost, 6.0);
    assert_eq!(opt.open.iter().copied().collect::<Vec<_>>(), vec![FacilityId::new(0)]);

    let mut single = MetricInstance::with_matrix(vec![4.0]).unwrap();
    single.add_client_column(vec![1.5]).unwrap();
    single.add_client_column(vec![2.5]).unwrap();
    assert_eq!(exact_opt(&single).unwrap().cost, 8.0);

    let empty = MetricInstance::with_matrix(vec![4.0, 9.0]).unwrap();
    let opt = exact_opt(&empty).unwrap();
    assert_eq!(opt.cost, 0.0);
    assert!(opt.open.is_empty());

    let big = MetricInstance::with_matrix(vec![1.0; 21]).unwrap();
    assert!(exact_opt(&big).is_err());
}

#[test]
fn greedy_stays_between_opt_and_certified_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..60 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=10);
        let (inst, _) = random_instance(&mut rng, m, n);
        let greedy = static_greedy(&inst).unwrap();
        let opt = exact_opt(&inst).unwrap();
        assert!(greedy.cost >= opt.cost - 1e-9);
        assert!(greedy.cost <= 1024.0 * opt.cost + 1e-9);
    }
}

/// Greedy output, leveled by bucketing each cluster's average cost, should
/// admit no strongly blocking cluster: no facility/subset/level triple with
/// true-distance average below `b^(k-mu-1)` whose members all sit above `k`
/// at admissible distance, subject to the usual kind conditions.
#[test]
fn greedy_output_has_no_strongly_blocking_cluster() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let geometry = LevelGeometry::new(1.0, 3).unwrap();
    let mu = geometry.mu();
    for round in 0..60 {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=8);
        let (inst, ids) = random_instance(&mut rng, m, n);
        let greedy = static_greedy(&inst).unwrap();

        let mut client_level = std::collections::BTreeMap::new();
        let mut critical_level: std::collections::BTreeMap<FacilityId, i32> =
            std::collections::BTreeMap::new();
        let mut min_level: std::collections::BTreeMap<FacilityId, i32> =
            std::collections::BTreeMap::new();
        for cluster in &greedy.clusters {
            let level = geometry.min_assignment_level(cluster.average_cost).unwrap();
            for &j in &cluster.clients {
                client_level.insert(j, level);
            }
            if cluster.kind == ClusterKind::Critical {
                critical_level.insert(cluster.facility, level);
            }
            min_level
                .entry(cluster.facility)
                .and_modify(|ml| *ml = (*ml).min(level))
                .or_insert(level);
        }

        let levels: Vec<i32> = client_level.values().copied().collect();
        let (lo, hi) = match (levels.iter().min(), levels.iter().max()) {
            (Some(&lo), Some(&hi)) => (lo - mu - 2, hi),
            _ => continue,
        };
        for facility in inst.facilities() {
            for k in lo..hi {
                let satellite_ok = critical_level.get(&facility).is_some_and(|&cl| cl <= k);
                let critical_ok = min_level.get(&facility).is_none_or(|&ml| k <= ml);
                let eligible: Vec<(f64, ClientId)> = ids
                    .iter()
                    .filter(|j| client_level[j] > k)
                    .map(|&j| (inst.distance(facility, j).unwrap(), j))
                    .filter(|&(d, _)| geometry.min_assignment_level(d).unwrap() <= k)
                    .collect();
                if eligible.is_empty() {
                    continue;
                }
                let strong = geometry.threshold(k - mu - 1);
                if satellite_ok {
                    for &(d, j) in &eligible {
                        assert!(
                            d >= strong,
                            "round {round}: satellite ({facility}, {j}) strongly blocking at {k}"
                        );
                    }
                }
                if critical_ok {
                    let f = inst.opening_cost(facility).unwrap();
                    for mask in 1u64..(1 << eligible.len()) {
                        let mut total = f;
                        let mut size = 0u64;
                        for (idx, &(d, _)) in eligible.iter().enumerate() {
                            if mask & (1 << idx) != 0 {
                                total += d;
                                size += 1;
                            }
                        }
                        assert!(
                            total >= strong * size as f64,
                            "round {round}: critical subset strongly blocking at ({facility}, {k})"
                        );
                    }
                }
            }
        }
    }
}

/// The engine-facing sweep must return exactly the lowest level at which
/// the per-level existence predicate fires, and its extracted cluster must
/// satisfy the blocking definition under bucketized distances.
#[test]
fn sweep_matches_per_level_existence_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for round in 0..80 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(0..=25);
        let (inst, ids) = random_instance(&mut rng, m, n);
        let (eps, mu) = match round % 3 {
            0 => (1.0, 3),
            1 => (0.05, 1),
            _ => (0.3, 2),
        };
        let geometry = LevelGeometry::new(eps, mu).unwrap();
        let state = random_state(&mut rng, &inst, &ids, geometry.clone());

        let max_level = state.clusters().map(|(_, c)| c.level()).max();
        for facility in inst.facilities() {
            let ctx = state.facility_context(&inst, facility);
            let swept = state.detector().min_blocking_level(&geometry, facility, &ctx);

            let mut naive: Option<i32> = None;
            if let Some(hi) = max_level {
                let lo = ids
                    .iter()
                    .map(|&j| {
                        let d = inst.distance(facility, j).unwrap();
                        geometry.min_assignment_level(d).unwrap()
                    })
                    .min()
                    .unwrap_or(hi);
                for k in lo..hi {
                    if state.detector().exists_blocking(&geometry, facility, k, &ctx) {
                        naive = Some(k);
                        break;
                    }
                }
            }
            assert_eq!(
                swept.as_ref().map(|c| c.level),
                naive,
                "round {round}, {facility}: sweep disagrees with per-level scan"
            );

            let Some(candidate) = swept else { continue };
            // Definition check on the extracted cluster.
            let k = candidate.level;
            let threshold = geometry.threshold(k - mu);
            let mut weight = 0.0;
            for &j in &candidate.clients {
                let level = state.level_of(j).unwrap();
                assert!(level > k);
                let d = inst.distance(facility, j).unwrap();
                let bucket = geometry.distance_bucket(d).unwrap();
                assert!(bucket + mu <= k);
                weight += geometry.threshold(bucket);
            }
            let opening = match candidate.kind {
                ClusterKind::Critical => {
                    assert!(ctx.min_cluster_level.is_none_or(|ml| k <= ml));
                    inst.opening_cost(facility).unwrap()
                }
                ClusterKind::Satellite => {
                    assert_eq!(candidate.clients.len(), 1);
                    assert!(ctx.critical_level.is_some_and(|cl| cl <= k));
                    0.0
                }
            };
            assert!(opening + weight < threshold * candidate.clients.len() as f64);
        }
    }
}
