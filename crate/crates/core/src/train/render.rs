//! Prediction visualization: one raster per sample with the predicted modes
//! in red and the ground truth in green.

use std::path::{Path, PathBuf};

use crate::model::PredictionModel;
use crate::raster::draw_path;

use super::{PreparedDataset, TrainError};

const PREDICTION_COLOR: [u8; 3] = [255, 0, 0];
const GROUND_TRUTH_COLOR: [u8; 3] = [0, 255, 0];

/// Renders predictions for the given samples into `out_dir` as PNG files,
/// one per sample, named by sample id. Ground truth is drawn last so its
/// pixels stay visible where paths overlap.
pub fn export_predictions(
    model: &PredictionModel,
    data: &PreparedDataset,
    idx: &[usize],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, TrainError> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::with_capacity(idx.len());
    for &i in idx {
        let sample = &data.samples[i];
        let raster = if model.cfg.use_map {
            Some(&data.rasters[i])
        } else {
            None
        };
        let pred = model.predict_prepared(sample, raster)?;

        let mut img = data.rasters[i].clone();
        for mode in &pred.modes {
            draw_path(&mut img, mode, &data.raster_cfg, PREDICTION_COLOR);
        }
        draw_path(
            &mut img,
            &sample.future,
            &data.raster_cfg,
            GROUND_TRUTH_COLOR,
        );

        let path = out_dir.join(format!("{}.png", sample.sample_id));
        img.save_png(&path)?;
        files.push(path);
    }
    Ok(files)
}
