//! Dataset preparation: normalization to the target frame plus cached
//! rasters and drivable masks.

use crate::encoders::{track_feature_rows, Normalizer};
use crate::raster::{drivable_mask, rasterize, RasterConfig, RasterImage};
use crate::scene::{to_target_frame, Sample};

use super::TrainError;

/// Samples in the target frame with pre-rendered rasters and masks.
pub struct PreparedDataset {
    pub samples: Vec<Sample>,
    pub rasters: Vec<RasterImage>,
    pub masks: Vec<Vec<bool>>,
    pub raster_cfg: RasterConfig,
}

impl PreparedDataset {
    /// Normalizes every raw sample and renders its raster and mask once.
    pub fn prepare(raw: &[Sample], raster_cfg: &RasterConfig) -> Result<Self, TrainError> {
        let mut samples = Vec::with_capacity(raw.len());
        let mut rasters = Vec::with_capacity(raw.len());
        let mut masks = Vec::with_capacity(raw.len());
        for s in raw {
            let local = to_target_frame(s).map_err(crate::model::ModelError::from)?;
            rasters.push(rasterize(&local, raster_cfg)?);
            masks.push(drivable_mask(&local, raster_cfg)?);
            samples.push(local);
        }
        Ok(PreparedDataset {
            samples,
            rasters,
            masks,
            raster_cfg: raster_cfg.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.sample_id.clone()).collect()
    }

    /// Maps split id lists back to dataset indices.
    pub fn indices_of(&self, ids: &[String]) -> Vec<usize> {
        let lookup: std::collections::BTreeMap<&str, usize> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.sample_id.as_str(), i))
            .collect();
        ids.iter()
            .filter_map(|id| lookup.get(id.as_str()).copied())
            .collect()
    }

    /// Fits standardization constants on the given (training) indices, over
    /// every valid step of every track plus the future waypoints.
    pub fn fit_normalizer(&self, idx: &[usize]) -> Normalizer {
        let mut feat_rows = Vec::new();
        let mut future_rows = Vec::new();
        for &i in idx {
            let s = &self.samples[i];
            for track in std::iter::once(&s.target).chain(s.neighbors.iter()) {
                for (row, valid) in track_feature_rows(track)
                    .into_iter()
                    .zip(track.valid.iter())
                {
                    if *valid {
                        feat_rows.push(row);
                    }
                }
            }
            for p in &s.future {
                future_rows.push([p.x, p.y]);
            }
        }
        Normalizer::fit(&feat_rows, &future_rows)
    }
}
