//! Instance preparation for the sliding-window protocol: facility sampling,
//! opening-cost calibration, and the update permutation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::HarnessError;
use crate::io::PointSet;

/// Facility points and client points, in input order.
pub type PointSplit = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Seeded uniform sample without replacement: a fraction of the points
/// become facilities, the rest stay clients.
pub fn split_facilities(
    points: &PointSet,
    fraction: f64,
    seed: u64,
) -> Result<PointSplit, HarnessError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::Config(format!(
            "facility fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = points.len();
    let count = (fraction * n as f64).floor() as usize;
    if count == 0 {
        return Err(HarnessError::Config(format!(
            "facility fraction {fraction} of {n} points yields no facility"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut is_facility = vec![false; n];
    for &i in &chosen {
        is_facility[i] = true;
    }
    let mut facilities = Vec::with_capacity(count);
    let mut clients = Vec::with_capacity(n - count);
    for (i, p) in points.points.iter().enumerate() {
        if is_facility[i] {
            facilities.push(p.clone());
        } else {
            clients.push(p.clone());
        }
    }
    Ok((facilities, clients))
}

/// Uniform opening cost: 100 times the median over clients of the distance
/// to their nearest facility (lower middle for even counts). Distances
/// include the instance offset.
pub fn calibrate_costs(
    facilities: &[Vec<f64>],
    clients: &[Vec<f64>],
    offset: f64,
) -> Result<f64, HarnessError> {
    if facilities.is_empty() || clients.is_empty() {
        return Err(HarnessError::Config(
            "opening-cost calibration needs at least one facility and one client".into(),
        ));
    }
    let mut nearest: Vec<f64> = clients
        .iter()
        .map(|c| {
            facilities
                .iter()
                .map(|f| l2(f, c) + offset)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(|a, b| a.total_cmp(b));
    Ok(100.0 * nearest[(nearest.len() - 1) / 2])
}

/// Seeded permutation of `0..n`, the order in which client points enter the
/// window.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
