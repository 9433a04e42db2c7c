//! Training loop, evaluation runner and the ablation matrix.

mod ablation;
mod dataset;
mod render;

pub use ablation::{run_ablation, standard_matrix, AblationRow, AblationStudy, AblationTable};
pub use dataset::PreparedDataset;
pub use render::export_predictions;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{constant_velocity_baseline, ModeSelection, MtpLossConfig};
use crate::encoders::{BackboneKind, EncoderParams};
use crate::metrics::{aggregate_report, evaluate_sample, MetricError, MetricReport};
use crate::model::{ModelConfig, ModelError, PredictionModel, TrainBatch};
use crate::nn::optim::step_decay_lr;
use crate::nn::Nadam;
use crate::raster::{RasterConfig, RasterError, RasterImage};
use crate::scene::Sample;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("training aborted at step {step}: {source}")]
    Aborted { step: usize, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("empty split")]
    EmptySplit,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Width hyperparameters, separated so configs stay readable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub conv1d_channels: usize,
    pub conv1d_kernel: usize,
    pub lstm_hidden: usize,
    pub tiny_channels: [usize; 4],
    pub map_feature_dim: usize,
    pub decoder_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            conv1d_channels: 64,
            conv1d_kernel: 3,
            lstm_hidden: 128,
            tiny_channels: [8, 16, 32, 64],
            map_feature_dim: 128,
            decoder_hidden: 256,
        }
    }
}

/// Full training recipe; serializes as the CLI config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Decay the learning rate every this many epochs...
    pub lr_step_epochs: usize,
    /// ...by this factor.
    pub lr_decay: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub k_modes: usize,
    pub backbone: BackboneKind,
    pub use_map: bool,
    pub use_distance_attention: bool,
    pub use_area_attention: bool,
    pub use_physical_info: bool,
    pub lstm_layers: usize,
    pub alpha_reg: f64,
    pub mode_selection: ModeSelection,
    pub split_ratios: (f64, f64, f64),
    pub split_seed: u64,
    pub dims: ModelDims,
    pub raster: RasterConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 6e-4,
            lr_step_epochs: 2,
            lr_decay: 0.9,
            epochs: 50,
            dropout: 0.2,
            batch_size: 32,
            seed: 0,
            k_modes: crate::scene::DEFAULT_K,
            backbone: BackboneKind::TinyCnn,
            use_map: true,
            use_distance_attention: true,
            use_area_attention: true,
            use_physical_info: true,
            lstm_layers: 2,
            alpha_reg: 1.0,
            mode_selection: ModeSelection::MinAde,
            split_ratios: (0.8, 0.1, 0.1),
            split_seed: 0,
            dims: ModelDims::default(),
            raster: RasterConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Small widths and raster for fast experiments and tests.
    pub fn tiny() -> Self {
        TrainConfig {
            dims: ModelDims {
                conv1d_channels: 16,
                conv1d_kernel: 3,
                lstm_hidden: 32,
                tiny_channels: [4, 8, 8, 16],
                map_feature_dim: 32,
                decoder_hidden: 48,
            },
            raster: RasterConfig {
                height_px: 96,
                width_px: 96,
                resolution: 1.0,
                anchor_row: 48,
                anchor_col: 24,
                ..RasterConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::InvalidConfig(format!(
                "dropout {}",
                self.dropout
            )));
        }
        if self.k_modes == 0 {
            return Err(TrainError::InvalidConfig("k_modes must be >= 1".into()));
        }
        if !(self.lstm_layers == 1 || self.lstm_layers == 2) {
            return Err(TrainError::InvalidConfig(format!(
                "lstm_layers {}",
                self.lstm_layers
            )));
        }
        self.model_config()
            .encoder
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        self.raster.validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            k_modes: self.k_modes,
            encoder: EncoderParams {
                backbone: self.backbone,
                conv1d_kernel: self.dims.conv1d_kernel,
                conv1d_channels: self.dims.conv1d_channels,
                lstm_hidden: self.dims.lstm_hidden,
                lstm_layers: self.lstm_layers,
                dropout: self.dropout,
                tiny_channels: self.dims.tiny_channels,
                map_feature_dim: self.dims.map_feature_dim,
            },
            decoder_hidden: self.dims.decoder_hidden,
            use_map: self.use_map,
            use_distance_attention: self.use_distance_attention,
            use_area_attention: self.use_area_attention,
            use_physical_info: self.use_physical_info,
            raster: self.raster.clone(),
            loss: MtpLossConfig {
                alpha_reg: self.alpha_reg,
                selection: self.mode_selection,
            },
        }
    }

    pub fn write_json<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), TrainError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<std::path::Path>>(path: P) -> Result<Self, TrainError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Everything measured during one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub epoch_losses: Vec<f64>,
    pub final_report: MetricReport,
    pub wall_clock_s: f64,
    /// Inference throughput measured during the final evaluation, samples/s.
    pub throughput_sps: f64,
}

impl RunRecord {
    pub fn write_json<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), TrainError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<std::path::Path>>(path: P) -> Result<Self, TrainError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Trains a model on `train_idx` and evaluates it on `eval_idx`.
///
/// Deterministic given the config seed: initialization, shuffling and
/// dropout all derive from it, and the numeric path is single-threaded.
pub fn train(
    cfg: &TrainConfig,
    data: &PreparedDataset,
    train_idx: &[usize],
    eval_idx: &[usize],
) -> Result<(PredictionModel, RunRecord), TrainError> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let started = Instant::now();

    let mut model = PredictionModel::new(cfg.model_config(), cfg.seed);
    model.norm = data.fit_normalizer(train_idx);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e3779b97f4a7c15));
    let mut opt = Nadam::new(cfg.learning_rate);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = train_idx.to_vec();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        opt.set_lr(step_decay_lr(
            cfg.learning_rate,
            cfg.lr_decay,
            cfg.lr_step_epochs,
            epoch,
        ));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &data.samples[i]).collect();
            let rasters: Vec<Option<&RasterImage>> = chunk
                .iter()
                .map(|&i| {
                    if cfg.use_map {
                        Some(&data.rasters[i])
                    } else {
                        None
                    }
                })
                .collect();
            let batch = TrainBatch::assemble(&samples, &rasters, &model.norm, &model.cfg)?;
            let loss = model
                .train_step(&batch, &mut rng)
                .map_err(|source| TrainError::Aborted { step, source })?;
            opt.step(&mut model);
            loss_sum += loss.total * chunk.len() as f64;
            step += 1;
        }
        epoch_losses.push(loss_sum / order.len() as f64);
    }

    let (final_report, throughput_sps) = evaluate(
        &model,
        data,
        if eval_idx.is_empty() {
            train_idx
        } else {
            eval_idx
        },
    )?;
    let record = RunRecord {
        config: cfg.clone(),
        epoch_losses,
        final_report,
        wall_clock_s: started.elapsed().as_secs_f64(),
        throughput_sps,
    };
    Ok((model, record))
}

/// Runs inference over a split and aggregates the metric suite; also returns
/// the measured inference throughput in samples per second.
pub fn evaluate(
    model: &PredictionModel,
    data: &PreparedDataset,
    idx: &[usize],
) -> Result<(MetricReport, f64), TrainError> {
    if idx.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let mut preds = Vec::with_capacity(idx.len());
    let t0 = Instant::now();
    for &i in idx {
        let raster = if model.cfg.use_map {
            Some(&data.rasters[i])
        } else {
            None
        };
        preds.push(model.predict_prepared(&data.samples[i], raster)?);
    }
    let infer_s = t0.elapsed().as_secs_f64();

    let mut sample_metrics = Vec::with_capacity(idx.len());
    for (pi, &i) in idx.iter().enumerate() {
        sample_metrics.push(evaluate_sample(
            &preds[pi],
            &data.samples[i].future,
            &data.masks[i],
            &data.raster_cfg,
        )?);
    }
    let report = aggregate_report(&sample_metrics)?;
    Ok((report, idx.len() as f64 / infer_s.max(1e-9)))
}

/// Evaluates the constant-velocity-and-yaw baseline over a split.
pub fn evaluate_baseline(
    data: &PreparedDataset,
    idx: &[usize],
    k: usize,
) -> Result<MetricReport, TrainError> {
    if idx.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let mut sample_metrics = Vec::with_capacity(idx.len());
    for &i in idx {
        let pred = constant_velocity_baseline(&data.samples[i], k);
        sample_metrics.push(evaluate_sample(
            &pred,
            &data.samples[i].future,
            &data.masks[i],
            &data.raster_cfg,
        )?);
    }
    Ok(aggregate_report(&sample_metrics)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, DatasetSpec};

    fn quick_cfg(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            seed,
            batch_size: 8,
            k_modes: 3,
            learning_rate: 2e-3,
            dropout: 0.1,
            ..TrainConfig::tiny()
        }
    }

    fn tiny_dataset(count: usize, seed: u64) -> PreparedDataset {
        let raw = generate_dataset(&DatasetSpec::mixed(count, seed));
        PreparedDataset::prepare(&raw, &TrainConfig::tiny().raster).unwrap()
    }

    #[test]
    fn losses_finite_and_deterministic_across_runs() {
        let data = tiny_dataset(12, 3);
        let idx: Vec<usize> = (0..data.len()).collect();
        let cfg = quick_cfg(2, 7);
        let (_, rec_a) = train(&cfg, &data, &idx, &idx).unwrap();
        let (_, rec_b) = train(&cfg, &data, &idx, &idx).unwrap();
        assert!(rec_a.epoch_losses.iter().all(|l| l.is_finite()));
        for (a, b) in rec_a.epoch_losses.iter().zip(rec_b.epoch_losses.iter()) {
            assert!((a - b).abs() < 1e-6, "non-deterministic: {a} vs {b}");
        }
        assert_eq!(rec_a.final_report, rec_b.final_report);
        assert!(rec_a.throughput_sps > 0.0);
    }

    #[test]
    fn attention_scalars_move_during_training() {
        let raw = generate_dataset(&DatasetSpec {
            max_neighbors: 4,
            ..DatasetSpec::mixed(16, 5)
        });
        let data = PreparedDataset::prepare(&raw, &TrainConfig::tiny().raster).unwrap();
        let idx: Vec<usize> = (0..data.len()).collect();
        let cfg = quick_cfg(1, 9);

        let before = PredictionModel::new(cfg.model_config(), cfg.seed)
            .attention
            .snapshot();
        let (model, _) = train(&cfg, &data, &idx, &idx).unwrap();
        let after = model.attention.snapshot();
        for (i, (b, a)) in before.iter().zip(after.iter()).enumerate() {
            assert!(
                (a - b).abs() > 1e-4,
                "attention scalar {i} did not move: {b} -> {a}"
            );
        }
    }

    #[test]
    fn baseline_exact_on_noise_free_straights() {
        let raw = generate_dataset(&DatasetSpec {
            kind_weights: [1.0, 0.0, 0.0, 0.0, 0.0],
            noise_std: 0.0,
            ..DatasetSpec::mixed(10, 11)
        });
        let data = PreparedDataset::prepare(&raw, &TrainConfig::tiny().raster).unwrap();
        let idx: Vec<usize> = (0..data.len()).collect();
        let report = evaluate_baseline(&data, &idx, 5).unwrap();
        assert!(
            report.min_ade_1 < 1e-9,
            "baseline should be exact, got {}",
            report.min_ade_1
        );
        assert_eq!(report.min_ade_1, report.min_ade_5);
        assert_eq!(report.miss_rate_1, 0.0);
    }

    #[test]
    fn nan_abort_names_step_and_role() {
        let mut data = tiny_dataset(4, 1);
        data.samples[2].future[5].x = f64::NAN;
        let idx: Vec<usize> = (0..data.len()).collect();
        let cfg = quick_cfg(2, 2);
        match train(&cfg, &data, &idx, &idx) {
            Err(TrainError::Aborted {
                step,
                source: ModelError::NonFinite { role },
            }) => {
                // NaN futures poison the fitted output stats, so the first
                // non-finite tensor is the trajectory head itself
                assert_eq!(step, 0);
                assert_eq!(role, "trajectory_head");
            }
            Ok(_) => panic!("expected abort on NaN ground truth"),
            Err(other) => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let good = TrainConfig::tiny();
        assert!(good.validate().is_ok());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            epochs: 0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lstm_layers: 3,
            ..good.clone()
        }
        .validate()
        .is_err());
        let mut even_kernel = good.clone();
        even_kernel.dims.conv1d_kernel = 4;
        assert!(even_kernel.validate().is_err());
        let mut bad_raster = good;
        bad_raster.raster.resolution = -1.0;
        assert!(bad_raster.validate().is_err());
    }

    #[test]
    fn config_and_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.json");
        let cfg = quick_cfg(2, 3);
        cfg.write_json(&cfg_path).unwrap();
        assert_eq!(TrainConfig::read_json(&cfg_path).unwrap(), cfg);

        // defaults fill missing fields
        std::fs::write(&cfg_path, "{\"epochs\": 3}").unwrap();
        let partial = TrainConfig::read_json(&cfg_path).unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.learning_rate, 6e-4);
    }
}
