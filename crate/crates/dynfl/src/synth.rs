//! Seeded Gaussian-mixture point generator, so benchmarks and acceptance
//! runs need no external downloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::io::PointSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub clusters: usize,
    pub dim: usize,
    pub spread: f64,
    pub center_range: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n: 1000, clusters: 5, dim: 2, spread: 5.0, center_range: 50.0 }
    }
}

pub fn generate(config: &SynthConfig, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, config.spread).expect("positive spread");
    let centers: Vec<Vec<f64>> = (0..config.clusters.max(1))
        .map(|_| {
            (0..config.dim)
                .map(|_| rng.gen_range(-config.center_range..config.center_range))
                .collect()
        })
        .collect();
    let points = (0..config.n)
        .map(|_| {
            let center = &centers[rng.gen_range(0..centers.len())];
            center.iter().map(|c| c + normal.sample(&mut rng)).collect()
        })
        .collect();
    PointSet { points, dim: config.dim }
}
