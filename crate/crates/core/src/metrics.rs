//! Displacement, miss-rate and off-road metrics with split-level aggregation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RasterConfig;
use crate::scene::{Point2, PredictionSet};

/// Miss threshold in meters: a mode covers the ground truth when every
/// waypoint stays within this distance.
pub const MISS_THRESHOLD_M: f64 = 2.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("prediction has {pred} waypoints but ground truth has {gt}")]
    ShapeMismatch { pred: usize, gt: usize },
    #[error("empty split")]
    EmptySplit,
    #[error("missing drivable mask for sample {0}")]
    MissingMask(usize),
    #[error("aggregate violates metric invariants: {0}")]
    InvariantViolation(String),
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Aggregated metrics over a split, keyed with the benchmark column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "minADE_1")]
    pub min_ade_1: f64,
    #[serde(rename = "minADE_5")]
    pub min_ade_5: f64,
    #[serde(rename = "minFDE_1")]
    pub min_fde_1: f64,
    #[serde(rename = "minFDE_5")]
    pub min_fde_5: f64,
    #[serde(rename = "missRate_1")]
    pub miss_rate_1: f64,
    #[serde(rename = "missRate_5")]
    pub miss_rate_5: f64,
    #[serde(rename = "Off-Road Rate")]
    pub offroad_rate: f64,
    pub sample_count: usize,
}

impl MetricReport {
    pub fn validate(&self) -> Result<(), MetricError> {
        let checks = [
            (
                self.min_ade_5 <= self.min_ade_1 + 1e-12,
                "minADE_5 > minADE_1",
            ),
            (
                self.min_fde_5 <= self.min_fde_1 + 1e-12,
                "minFDE_5 > minFDE_1",
            ),
            (
                self.miss_rate_5 <= self.miss_rate_1 + 1e-12,
                "missRate_5 > missRate_1",
            ),
            (
                (0.0..=1.0).contains(&self.miss_rate_1),
                "missRate_1 outside [0,1]",
            ),
            (
                (0.0..=1.0).contains(&self.miss_rate_5),
                "missRate_5 outside [0,1]",
            ),
            (
                (0.0..=1.0).contains(&self.offroad_rate),
                "off-road rate outside [0,1]",
            ),
            (
                self.min_ade_1 >= 0.0 && self.min_fde_1 >= 0.0,
                "negative displacement",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(MetricError::InvariantViolation(msg.into()));
            }
        }
        Ok(())
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<(), MetricError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self, MetricError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Indices of the k most probable modes, probability descending, ties broken
/// by the lower mode index.
pub fn top_k(pred: &PredictionSet, k: usize) -> Result<Vec<usize>, MetricError> {
    let max = pred.num_modes();
    if k == 0 || k > max {
        return Err(MetricError::KOutOfRange { k, max });
    }
    let mut idx: Vec<usize> = (0..max).collect();
    // stable sort keeps lower indices first on ties
    idx.sort_by(|a, b| {
        pred.probabilities[*b]
            .partial_cmp(&pred.probabilities[*a])
            .unwrap()
    });
    idx.truncate(k);
    Ok(idx)
}

fn check_mode(mode: &[Point2], gt: &[Point2]) -> Result<(), MetricError> {
    if mode.len() != gt.len() || gt.is_empty() {
        return Err(MetricError::ShapeMismatch {
            pred: mode.len(),
            gt: gt.len(),
        });
    }
    Ok(())
}

/// Minimum over the top-k modes of the mean pointwise displacement.
pub fn min_ade_k(pred: &PredictionSet, gt: &[Point2], k: usize) -> Result<f64, MetricError> {
    let mut best = f64::INFINITY;
    for i in top_k(pred, k)? {
        check_mode(&pred.modes[i], gt)?;
        let ade = pred.modes[i]
            .iter()
            .zip(gt.iter())
            .map(|(a, b)| a.dist(b))
            .sum::<f64>()
            / gt.len() as f64;
        best = best.min(ade);
    }
    Ok(best)
}

/// Minimum over the top-k modes of the final-waypoint displacement.
pub fn min_fde_k(pred: &PredictionSet, gt: &[Point2], k: usize) -> Result<f64, MetricError> {
    let mut best = f64::INFINITY;
    for i in top_k(pred, k)? {
        check_mode(&pred.modes[i], gt)?;
        best = best.min(pred.modes[i].last().unwrap().dist(gt.last().unwrap()));
    }
    Ok(best)
}

/// Largest pointwise deviation of one mode from the ground truth.
pub fn max_pointwise_deviation(mode: &[Point2], gt: &[Point2]) -> f64 {
    mode.iter()
        .zip(gt.iter())
        .map(|(a, b)| a.dist(b))
        .fold(0.0, f64::max)
}

/// A sample is missed when every top-k mode deviates by more than the
/// threshold at some timestep; the rate is misses over samples.
pub fn miss_rate_k(
    preds: &[PredictionSet],
    gts: &[Vec<Point2>],
    k: usize,
    threshold: f64,
) -> Result<f64, MetricError> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(MetricError::EmptySplit);
    }
    let mut misses = 0usize;
    for (pred, gt) in preds.iter().zip(gts.iter()) {
        let mut missed = true;
        for i in top_k(pred, k)? {
            check_mode(&pred.modes[i], gt)?;
            if max_pointwise_deviation(&pred.modes[i], gt) <= threshold {
                missed = false;
                break;
            }
        }
        if missed {
            misses += 1;
        }
    }
    Ok(misses as f64 / preds.len() as f64)
}

/// A trajectory is off-road when any waypoint maps to a pixel outside the
/// drivable mask; waypoints outside the raster window count as off-road.
pub fn trajectory_off_road(mode: &[Point2], mask: &[bool], cfg: &RasterConfig) -> bool {
    mode.iter().any(|p| match cfg.point_to_pixel(*p) {
        Some((r, c)) => !mask[r * cfg.width_px + c],
        None => true,
    })
}

/// Fraction of predicted trajectories (all modes of all samples) that leave
/// the drivable area.
pub fn offroad_rate(
    preds: &[PredictionSet],
    masks: &[Vec<bool>],
    cfg: &RasterConfig,
) -> Result<f64, MetricError> {
    if preds.is_empty() {
        return Err(MetricError::EmptySplit);
    }
    let mut off = 0usize;
    let mut total = 0usize;
    for (si, pred) in preds.iter().enumerate() {
        let mask = masks.get(si).ok_or(MetricError::MissingMask(si))?;
        for mode in &pred.modes {
            total += 1;
            if trajectory_off_road(mode, mask, cfg) {
                off += 1;
            }
        }
    }
    Ok(off as f64 / total.max(1) as f64)
}

/// Per-sample metric values feeding the aggregate report.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub min_ade_1: f64,
    pub min_ade_5: f64,
    pub min_fde_1: f64,
    pub min_fde_5: f64,
    pub miss_1: bool,
    pub miss_5: bool,
    /// Fraction of this sample's modes that leave the drivable area.
    pub offroad_fraction: f64,
}

/// Computes every per-sample metric; `k_report` is the large k of the report
/// columns (clamped to the number of modes for the baseline case).
pub fn evaluate_sample(
    pred: &PredictionSet,
    gt: &[Point2],
    mask: &[bool],
    cfg: &RasterConfig,
) -> Result<SampleMetrics, MetricError> {
    let k_hi = pred.num_modes().min(5);
    let miss = |k: usize| -> Result<bool, MetricError> {
        let mut missed = true;
        for i in top_k(pred, k)? {
            if max_pointwise_deviation(&pred.modes[i], gt) <= MISS_THRESHOLD_M {
                missed = false;
                break;
            }
        }
        Ok(missed)
    };
    let off = pred
        .modes
        .iter()
        .filter(|m| trajectory_off_road(m, mask, cfg))
        .count();
    Ok(SampleMetrics {
        min_ade_1: min_ade_k(pred, gt, 1)?,
        min_ade_5: min_ade_k(pred, gt, k_hi)?,
        min_fde_1: min_fde_k(pred, gt, 1)?,
        min_fde_5: min_fde_k(pred, gt, k_hi)?,
        miss_1: miss(1)?,
        miss_5: miss(k_hi)?,
        offroad_fraction: off as f64 / pred.num_modes().max(1) as f64,
    })
}

/// Arithmetic means over the split.
pub fn aggregate_report(samples: &[SampleMetrics]) -> Result<MetricReport, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::EmptySplit);
    }
    let n = samples.len() as f64;
    let report = MetricReport {
        min_ade_1: samples.iter().map(|s| s.min_ade_1).sum::<f64>() / n,
        min_ade_5: samples.iter().map(|s| s.min_ade_5).sum::<f64>() / n,
        min_fde_1: samples.iter().map(|s| s.min_fde_1).sum::<f64>() / n,
        min_fde_5: samples.iter().map(|s| s.min_fde_5).sum::<f64>() / n,
        miss_rate_1: samples.iter().filter(|s| s.miss_1).count() as f64 / n,
        miss_rate_5: samples.iter().filter(|s| s.miss_5).count() as f64 / n,
        offroad_rate: samples.iter().map(|s| s.offroad_fraction).sum::<f64>() / n,
        sample_count: samples.len(),
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::T_F;

    fn line(dy: f64) -> Vec<Point2> {
        (1..=T_F).map(|t| Point2::new(t as f64, dy)).collect()
    }

    fn pred(modes: Vec<Vec<Point2>>, probs: Vec<f64>) -> PredictionSet {
        PredictionSet {
            modes,
            probabilities: probs,
        }
    }

    #[test]
    fn top_k_ordering_and_ties() {
        let p = pred(vec![line(0.0); 3], vec![0.1, 0.7, 0.2]);
        assert_eq!(top_k(&p, 1).unwrap(), vec![1]);
        assert_eq!(top_k(&p, 3).unwrap(), vec![1, 2, 0]);

        let uniform = pred(vec![line(0.0); 3], vec![1.0 / 3.0; 3]);
        assert_eq!(top_k(&uniform, 2).unwrap(), vec![0, 1]);
        assert!(top_k(&uniform, 4).is_err());
        assert!(top_k(&uniform, 0).is_err());
    }

    #[test]
    fn ade_examples() {
        let gt = line(0.0);
        let p = pred(vec![line(0.0), line(5.0)], vec![0.4, 0.6]);
        assert_eq!(min_ade_k(&p, &gt, 2).unwrap(), 0.0);

        let off = pred(vec![line(1.0)], vec![1.0]);
        assert!((min_ade_k(&off, &gt, 1).unwrap() - 1.0).abs() < 1e-12);

        // mode A offset by 1, mode B exact; A more probable
        let p = pred(vec![line(1.0), line(0.0)], vec![0.7, 0.3]);
        assert!((min_ade_k(&p, &gt, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(min_ade_k(&p, &gt, 2).unwrap(), 0.0);
    }

    #[test]
    fn fde_examples() {
        let gt = line(0.0);
        let exact = pred(vec![line(0.0)], vec![1.0]);
        assert_eq!(min_fde_k(&exact, &gt, 1).unwrap(), 0.0);

        let mut shifted = line(0.0);
        let last = shifted.last_mut().unwrap();
        last.y += 3.0;
        let p = pred(vec![shifted], vec![1.0]);
        assert!((min_fde_k(&p, &gt, 1).unwrap() - 3.0).abs() < 1e-12);

        // final errors 2.0 and 0.5 both within top-2
        let mut m1 = line(0.0);
        m1.last_mut().unwrap().y = 2.0;
        let mut m2 = line(0.0);
        m2.last_mut().unwrap().y = 0.5;
        let p = pred(vec![m1, m2], vec![0.6, 0.4]);
        assert!((min_fde_k(&p, &gt, 2).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn miss_rate_examples() {
        let gt = line(0.0);
        let perfect = vec![pred(vec![line(0.0)], vec![1.0]); 3];
        let gts = vec![gt.clone(); 3];
        assert_eq!(
            miss_rate_k(&perfect, &gts, 1, MISS_THRESHOLD_M).unwrap(),
            0.0
        );

        let over = vec![pred(vec![line(2.5)], vec![1.0])];
        assert_eq!(
            miss_rate_k(&over, &gts[..1], 1, MISS_THRESHOLD_M).unwrap(),
            1.0
        );

        // deviations {1.9, 2.1, 0.0, 3.0} -> rate 0.5
        let preds = vec![
            pred(vec![line(1.9)], vec![1.0]),
            pred(vec![line(2.1)], vec![1.0]),
            pred(vec![line(0.0)], vec![1.0]),
            pred(vec![line(3.0)], vec![1.0]),
        ];
        let gts = vec![gt; 4];
        assert_eq!(miss_rate_k(&preds, &gts, 1, MISS_THRESHOLD_M).unwrap(), 0.5);
        assert!(miss_rate_k(&[], &[], 1, 2.0).is_err());
    }

    #[test]
    fn offroad_examples() {
        let cfg = RasterConfig::default();
        let all_on = vec![true; cfg.height_px * cfg.width_px];
        let all_off = vec![false; cfg.height_px * cfg.width_px];

        let p = pred(vec![line(0.0), line(1.0)], vec![0.5, 0.5]);
        assert_eq!(
            offroad_rate(
                std::slice::from_ref(&p),
                std::slice::from_ref(&all_on),
                &cfg
            )
            .unwrap(),
            0.0
        );
        assert_eq!(
            offroad_rate(std::slice::from_ref(&p), &[all_off], &cfg).unwrap(),
            1.0
        );

        // 2 samples x 2 modes, exactly one trajectory hits a hole
        let mut hole = all_on.clone();
        let (r, c) = cfg.point_to_pixel(Point2::new(5.0, 1.0)).unwrap();
        hole[r * cfg.width_px + c] = false;
        let rate = offroad_rate(&[p.clone(), p], &[all_on, hole], &cfg).unwrap();
        assert_eq!(rate, 0.25);
    }

    #[test]
    fn waypoints_outside_window_count_off_road() {
        let cfg = RasterConfig::default();
        let mask = vec![true; cfg.height_px * cfg.width_px];
        let mut far = line(0.0);
        far[5] = Point2::new(500.0, 0.0);
        assert!(trajectory_off_road(&far, &mask, &cfg));
    }

    #[test]
    fn aggregate_means_and_invariants() {
        let one = SampleMetrics {
            min_ade_1: 2.0,
            min_ade_5: 1.0,
            min_fde_1: 4.0,
            min_fde_5: 2.0,
            miss_1: true,
            miss_5: false,
            offroad_fraction: 0.2,
        };
        let report = aggregate_report(std::slice::from_ref(&one)).unwrap();
        assert_eq!(report.min_ade_1, 2.0);
        assert_eq!(report.miss_rate_1, 1.0);
        assert_eq!(report.miss_rate_5, 0.0);
        assert_eq!(report.sample_count, 1);
        report.validate().unwrap();

        let two = SampleMetrics {
            min_ade_1: 4.0,
            miss_1: false,
            ..one.clone()
        };
        let report = aggregate_report(&[one, two]).unwrap();
        assert_eq!(report.min_ade_1, 3.0);
        assert_eq!(report.miss_rate_1, 0.5);
    }

    #[test]
    fn metrics_non_increasing_in_k() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let k_total = rng.gen_range(1..=6usize);
            let modes: Vec<Vec<Point2>> = (0..k_total)
                .map(|_| {
                    (0..T_F)
                        .map(|_| {
                            Point2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0))
                        })
                        .collect()
                })
                .collect();
            let mut probs: Vec<f64> = (0..k_total).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= sum);
            let pred = PredictionSet {
                modes,
                probabilities: probs,
            };
            let gt: Vec<Point2> = (0..T_F)
                .map(|_| Point2::new(rng.gen_range(-20.0..20.0), 0.0))
                .collect();

            let mut prev_ade = f64::INFINITY;
            let mut prev_fde = f64::INFINITY;
            let mut prev_miss = 1.0f64;
            for k in 1..=k_total {
                let ade = min_ade_k(&pred, &gt, k).unwrap();
                let fde = min_fde_k(&pred, &gt, k).unwrap();
                let miss = miss_rate_k(
                    std::slice::from_ref(&pred),
                    std::slice::from_ref(&gt),
                    k,
                    8.0,
                )
                .unwrap();
                assert!(ade <= prev_ade && fde <= prev_fde && miss <= prev_miss);
                prev_ade = ade;
                prev_fde = fde;
                prev_miss = miss;
            }
        }
    }

    #[test]
    fn report_round_trips_with_exact_column_names() {
        let report = MetricReport {
            min_ade_1: 3.59,
            min_ade_5: 1.67,
            min_fde_1: 8.43,
            min_fde_5: 3.36,
            miss_rate_1: 0.9,
            miss_rate_5: 0.66,
            offroad_rate: 0.07,
            sample_count: 100,
        };
        let json = serde_json::to_string(&report).unwrap();
        for key in [
            "minADE_1",
            "minADE_5",
            "minFDE_1",
            "minFDE_5",
            "missRate_1",
            "missRate_5",
            "Off-Road Rate",
        ] {
            assert!(json.contains(&format!("\"{key}\"")), "missing column {key}");
        }
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }
}
