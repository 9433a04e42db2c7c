//! Map and trajectory encoders.
//!
//! The map encoder turns the BEV raster into a 128-d feature through a CNN
//! backbone and one dense layer; the trajectory encoder turns a state history
//! into a 128-d feature through a 1D convolution and stacked LSTMs.

mod map;
mod track;

pub use map::{
    raster_input, Backbone, Bottleneck, MapEncoder, MapEncoderCache, ResidualCnn, TinyCnn,
};
pub use track::{TrackEncoder, TrackEncoderCache};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{AgentTrack, HISTORY_LEN};

/// Features per history step: (x, y, v, a, yaw_rate).
pub const TRACK_FEATS: usize = 5;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("expected sequence of {expected} steps, got {got}")]
    SequenceLength { expected: usize, got: usize },
    #[error("raster shape {got:?} does not match config {expected:?}")]
    RasterShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid encoder params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    /// 50-layer bottleneck-residual CNN producing a 2048-d pooled feature.
    FullResidual50,
    /// Four stride-2 conv layers with global average pooling, 64-d.
    TinyCnn,
}

/// Architecture hyperparameters shared by both encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub backbone: BackboneKind,
    pub conv1d_kernel: usize,
    pub conv1d_channels: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    /// Dropout between stacked LSTM layers (training only).
    pub dropout: f64,
    /// Channel plan of the tiny backbone.
    pub tiny_channels: [usize; 4],
    /// Output dimension of the map encoder's dense layer.
    pub map_feature_dim: usize,
}

impl Default for EncoderParams {
    fn default() -> Self {
        EncoderParams {
            backbone: BackboneKind::TinyCnn,
            conv1d_kernel: 3,
            conv1d_channels: 64,
            lstm_hidden: 128,
            lstm_layers: 2,
            dropout: 0.2,
            tiny_channels: [8, 16, 32, 64],
            map_feature_dim: 128,
        }
    }
}

impl EncoderParams {
    /// Shrunken dimensions for fast gradient checks.
    pub fn tiny_for_tests() -> Self {
        EncoderParams {
            backbone: BackboneKind::TinyCnn,
            conv1d_kernel: 3,
            conv1d_channels: 6,
            lstm_hidden: 5,
            lstm_layers: 2,
            dropout: 0.0,
            tiny_channels: [2, 3, 3, 4],
            map_feature_dim: 7,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(EncoderError::InvalidParams(format!(
                "dropout {}",
                self.dropout
            )));
        }
        if self.lstm_layers == 0 || self.lstm_layers > 2 {
            return Err(EncoderError::InvalidParams(format!(
                "lstm_layers {}",
                self.lstm_layers
            )));
        }
        if self.conv1d_kernel.is_multiple_of(2) {
            return Err(EncoderError::InvalidParams(
                "conv1d kernel must be odd".into(),
            ));
        }
        Ok(())
    }
}

/// 128-d encoded map feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFeature(pub Vec<f64>);

/// 128-d encoded trajectory feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackFeature(pub Vec<f64>);

/// Per-feature affine standardization constants, fit on the training split
/// and stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub feat_mean: [f64; TRACK_FEATS],
    pub feat_std: [f64; TRACK_FEATS],
    pub future_mean: [f64; 2],
    pub future_std: [f64; 2],
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer {
            feat_mean: [0.0; TRACK_FEATS],
            feat_std: [1.0; TRACK_FEATS],
            future_mean: [0.0; 2],
            future_std: [1.0; 2],
        }
    }

    /// Fits means and stds from raw feature rows and future waypoints.
    pub fn fit(feature_rows: &[[f64; TRACK_FEATS]], futures: &[[f64; 2]]) -> Self {
        fn stats<const N: usize>(rows: &[[f64; N]]) -> ([f64; N], [f64; N]) {
            let mut mean = [0.0; N];
            let mut std = [1.0; N];
            if rows.is_empty() {
                return (mean, std);
            }
            for row in rows {
                for (m, v) in mean.iter_mut().zip(row.iter()) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= rows.len() as f64;
            }
            let mut var = [0.0; N];
            for row in rows {
                for ((vv, v), m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
                    *vv += (v - m) * (v - m);
                }
            }
            for (s, vv) in std.iter_mut().zip(var.iter()) {
                *s = (vv / rows.len() as f64).sqrt().max(1e-3);
            }
            (mean, std)
        }
        let (feat_mean, feat_std) = stats(feature_rows);
        let (future_mean, future_std) = stats(futures);
        Normalizer {
            feat_mean,
            feat_std,
            future_mean,
            future_std,
        }
    }
}

/// Raw per-step features of a track in the target frame.
pub fn track_feature_rows(track: &AgentTrack) -> Vec<[f64; TRACK_FEATS]> {
    track
        .states
        .iter()
        .map(|s| [s.x, s.y, s.v, s.a, s.yaw_rate])
        .collect()
}

/// Standardized features with invalid (padded) steps zeroed, flattened in
/// time order for a single track.
pub fn standardized_track_input(
    track: &AgentTrack,
    norm: &Normalizer,
) -> Result<Vec<f64>, EncoderError> {
    if track.states.len() != HISTORY_LEN {
        return Err(EncoderError::SequenceLength {
            expected: HISTORY_LEN,
            got: track.states.len(),
        });
    }
    let rows = track_feature_rows(track);
    let mut out = Vec::with_capacity(HISTORY_LEN * TRACK_FEATS);
    for (row, valid) in rows.iter().zip(track.valid.iter()) {
        for ((v, mean), std) in row.iter().zip(&norm.feat_mean).zip(&norm.feat_std) {
            out.push(if *valid { (v - mean) / std } else { 0.0 });
        }
    }
    Ok(out)
}
