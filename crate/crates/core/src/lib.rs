//! Multimodal vehicle trajectory prediction at desk scale.
//!
//! The crate covers the full pipeline: synthetic scenario generation with a
//! kinematic bicycle model, agent-centric BEV map rasterization, CNN/LSTM
//! encoders, learnable relative-distance and footprint-area attention over
//! neighbors, a K-mode decoder trained with a winner-takes-all objective, the
//! displacement/miss/off-road metric suite, and a train/evaluate/ablate
//! harness.

pub mod attention;
pub mod decoder;
pub mod encoders;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod raster;
pub mod scene;
pub mod synth;
pub mod train;

pub use attention::{
    area_att, area_scores, dist_att, dist_scores, fuse, AttentionParams, NeighborSet,
};
pub use decoder::{
    build_context, constant_velocity_baseline, mode_probabilities, mtp_loss, DecoderBank,
    LossBreakdown, ModeOutput, MtpLossConfig,
};
pub use encoders::{EncoderParams, MapEncoder, MapFeature, Normalizer, TrackEncoder, TrackFeature};
pub use metrics::{
    aggregate_report, min_ade_k, min_fde_k, miss_rate_k, offroad_rate, top_k, MetricReport,
    MISS_THRESHOLD_M,
};
pub use model::{ModelConfig, PredictionModel};
pub use raster::{drivable_mask, rasterize, RasterConfig, RasterImage};
pub use scene::{
    to_target_frame, validate_sample, AgentState, AgentTrack, ObjectClass, ObjectInfo, Point2,
    PredictionSet, Sample, SceneError, Violation, DEFAULT_K, DT, HISTORY_LEN, T_F, T_H,
};
pub use synth::{
    generate_dataset, generate_scenario, make_split, read_samples, read_samples_normalized,
    write_samples, DatasetSpec, DatasetSplit, ScenarioKind, ScenarioSpec, VectorMap,
};
pub use train::{
    evaluate, evaluate_baseline, export_predictions, run_ablation, standard_matrix, train,
    AblationStudy, AblationTable, PreparedDataset, RunRecord, TrainConfig,
};
