//! Deterministic dataset splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("ratios must be positive, got {0:?}")]
    NonPositiveRatio((f64, f64, f64)),
    #[error("ratios must sum to 1 within 1e-9, got sum {0}")]
    RatioSum(f64),
}

/// Disjoint, covering train/val/test partition of sample ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub split_seed: u64,
}

/// Shuffles ids deterministically and partitions them at the ceilings of the
/// cumulative quotas, so every id lands in exactly one split.
pub fn make_split(
    ids: &[String],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, SplitError> {
    let (r1, r2, r3) = ratios;
    if r1 <= 0.0 || r2 <= 0.0 || r3 <= 0.0 {
        return Err(SplitError::NonPositiveRatio(ratios));
    }
    let sum = r1 + r2 + r3;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::RatioSum(sum));
    }

    let mut shuffled: Vec<String> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let bound = |cum: f64| -> usize { ((n as f64 * cum - 1e-9).ceil().max(0.0) as usize).min(n) };
    let b1 = bound(r1);
    let b2 = bound(r1 + r2).max(b1);

    Ok(DatasetSplit {
        train: shuffled[..b1].to_vec(),
        val: shuffled[b1..b2].to_vec(),
        test: shuffled[b2..].to_vec(),
        split_seed: seed,
    })
}
