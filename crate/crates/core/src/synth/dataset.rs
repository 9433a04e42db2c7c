//! Batch scenario generation with mixed kinds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::Sample;
use crate::synth::{generate_scenario, ScenarioKind, ScenarioSpec};

/// Recipe for a whole dataset; per-sample specs are derived from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub count: usize,
    /// Relative weights for [straight, left_turn, right_turn, u_turn, fork].
    pub kind_weights: [f64; 5],
    pub speed_range: (f64, f64),
    pub max_neighbors: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl DatasetSpec {
    /// Every scenario class represented.
    pub fn mixed(count: usize, seed: u64) -> Self {
        DatasetSpec {
            count,
            kind_weights: [0.3, 0.2, 0.2, 0.1, 0.2],
            speed_range: (3.0, 11.0),
            max_neighbors: 3,
            noise_std: 0.1,
            seed,
        }
    }

    /// Fork-only scenarios, for mode-diversity experiments.
    pub fn forks(count: usize, seed: u64) -> Self {
        DatasetSpec {
            count,
            kind_weights: [0.0, 0.0, 0.0, 0.0, 1.0],
            speed_range: (5.0, 10.0),
            max_neighbors: 0,
            noise_std: 0.0,
            seed,
        }
    }

    /// Turn-heavy scenarios where straight extrapolation fails.
    pub fn curved(count: usize, seed: u64) -> Self {
        DatasetSpec {
            count,
            kind_weights: [0.1, 0.35, 0.35, 0.2, 0.0],
            speed_range: (4.0, 10.0),
            max_neighbors: 2,
            noise_std: 0.0,
            seed,
        }
    }
}

fn pick_kind(rng: &mut ChaCha8Rng, weights: &[f64; 5]) -> ScenarioKind {
    let total: f64 = weights.iter().sum();
    let mut roll = rng.gen_range(0.0..total.max(1e-12));
    for (kind, w) in ScenarioKind::ALL.iter().zip(weights.iter()) {
        if roll < *w {
            return *kind;
        }
        roll -= w;
    }
    ScenarioKind::Straight
}

/// Generates `count` samples deterministically from the dataset spec.
pub fn generate_dataset(spec: &DatasetSpec) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let kind = pick_kind(&mut rng, &spec.kind_weights);
        let (lo, hi) = spec.speed_range;
        let target_speed = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let n_neighbors = if spec.max_neighbors > 0 {
            rng.gen_range(0..=spec.max_neighbors)
        } else {
            0
        };
        let sample_seed: u64 = rng.gen();
        let mut sample = generate_scenario(&ScenarioSpec {
            kind,
            target_speed,
            n_neighbors,
            noise_std: spec.noise_std,
            seed: sample_seed,
        });
        // make ids unique across the dataset even on seed collisions
        sample.sample_id = format!("{:06}-{}", i, sample.sample_id);
        out.push(sample);
    }
    out
}
