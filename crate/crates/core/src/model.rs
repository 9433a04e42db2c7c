//! The assembled prediction model.
//!
//! Wires the map encoder, the shared trajectory encoder, the interaction
//! attention and the decoder bank into one trainable component with a
//! batched forward/backward step, an evaluation-mode predict path and a
//! binary checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{
    backward_ctx, forward_ctx, AttentionCtx, AttentionError, AttentionParams, NeighborSet,
};
use crate::decoder::{
    build_context, mode_probabilities, mtp_loss_batch, DecoderBank, DecoderError, LossBreakdown,
    ModeDecoderCache, MtpLossConfig, OBJECT_ENC_DIM,
};
use crate::encoders::{
    raster_input, standardized_track_input, EncoderError, EncoderParams, MapEncoder, Normalizer,
    TrackEncoder, TRACK_FEATS,
};
use crate::nn::{ParamVisitor, Visitable};
use crate::raster::{rasterize, RasterConfig, RasterError, RasterImage};
use crate::scene::{
    to_target_frame, ObjectInfo, Point2, PredictionSet, Sample, SceneError, HISTORY_LEN, T_F,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite values in {role}")]
    NonFinite { role: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

/// Architecture and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub k_modes: usize,
    pub encoder: EncoderParams,
    pub decoder_hidden: usize,
    pub use_map: bool,
    pub use_distance_attention: bool,
    pub use_area_attention: bool,
    pub use_physical_info: bool,
    pub raster: RasterConfig,
    pub loss: MtpLossConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k_modes: crate::scene::DEFAULT_K,
            encoder: EncoderParams::default(),
            decoder_hidden: 256,
            use_map: true,
            use_distance_attention: true,
            use_area_attention: true,
            use_physical_info: true,
            raster: RasterConfig::default(),
            loss: MtpLossConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Shrunken architecture and raster for fast tests.
    pub fn tiny_for_tests() -> Self {
        ModelConfig {
            k_modes: 3,
            encoder: EncoderParams::tiny_for_tests(),
            decoder_hidden: 8,
            raster: RasterConfig {
                height_px: 48,
                width_px: 48,
                resolution: 2.0,
                anchor_row: 24,
                anchor_col: 12,
                ..RasterConfig::default()
            },
            ..ModelConfig::default()
        }
    }

    pub fn ctx_dim(&self) -> usize {
        self.encoder.map_feature_dim + 3 * self.encoder.lstm_hidden + OBJECT_ENC_DIM
    }
}

/// Encoders, attention scalars and decoder bank behind one config.
pub struct PredictionModel {
    pub cfg: ModelConfig,
    pub norm: Normalizer,
    pub map_enc: MapEncoder,
    pub track_enc: TrackEncoder,
    pub attention: AttentionParams,
    pub bank: DecoderBank,
}

impl Visitable for PredictionModel {
    fn visit_params(&mut self, _prefix: &str, v: &mut dyn ParamVisitor) {
        self.map_enc.visit_params("map_enc", v);
        self.track_enc.visit_params("track_enc", v);
        self.attention.visit_params("attention", v);
        self.bank.visit_params("decoder", v);
    }
}

impl PredictionModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map_enc = MapEncoder::new(
            &cfg.encoder,
            cfg.raster.height_px,
            cfg.raster.width_px,
            &mut rng,
        );
        let track_enc = TrackEncoder::new(TRACK_FEATS, HISTORY_LEN, &cfg.encoder, &mut rng);
        let attention = AttentionParams::new();
        let bank = DecoderBank::new(
            cfg.k_modes,
            cfg.ctx_dim(),
            cfg.decoder_hidden,
            &cfg.encoder,
            &mut rng,
        );
        PredictionModel {
            cfg,
            norm: Normalizer::identity(),
            map_enc,
            track_enc,
            attention,
            bank,
        }
    }

    pub fn k(&self) -> usize {
        self.bank.k()
    }

    fn neighbor_set(&self, sample: &Sample, v: Vec<Vec<f64>>) -> NeighborSet {
        let cur = sample.target.current_state().unwrap();
        NeighborSet {
            q_pos: Point2::new(cur.x, cur.y),
            k_pos: sample
                .neighbors
                .iter()
                .map(|n| {
                    let s = n.current_state().unwrap();
                    Point2::new(s.x, s.y)
                })
                .collect(),
            q_area: sample.target.info.area(),
            k_area: sample.neighbors.iter().map(|n| n.info.area()).collect(),
            v,
            mask: sample
                .neighbors
                .iter()
                .map(|n| *n.valid.last().unwrap_or(&false))
                .collect(),
        }
    }

    fn context_for(
        &self,
        sample: &Sample,
        raster: Option<&RasterImage>,
    ) -> Result<Vec<f64>, ModelError> {
        let dm = self.cfg.encoder.map_feature_dim;
        let hd = self.cfg.encoder.lstm_hidden;

        let h_m = if self.cfg.use_map {
            let raster = raster.expect("map path needs a raster");
            self.map_enc.encode(raster)?.0
        } else {
            vec![0.0; dm]
        };

        let target_in = standardized_track_input(&sample.target, &self.norm)?;
        let h_s0 = self.track_enc.encode(&to_time_major(&target_in, 1))?.0;

        let h_att = if (self.cfg.use_distance_attention || self.cfg.use_area_attention)
            && !sample.neighbors.is_empty()
        {
            let mut feats = Vec::with_capacity(sample.neighbors.len());
            for n in &sample.neighbors {
                let n_in = standardized_track_input(n, &self.norm)?;
                feats.push(self.track_enc.encode(&to_time_major(&n_in, 1))?.0);
            }
            let ns = self.neighbor_set(sample, feats);
            let h_dist = if self.cfg.use_distance_attention {
                crate::attention::dist_att(&ns, &self.attention)?
            } else {
                vec![0.0; hd]
            };
            let h_area = if self.cfg.use_area_attention {
                crate::attention::area_att(&ns, &self.attention)?
            } else {
                vec![0.0; hd]
            };
            crate::attention::fuse(&h_dist, &h_area)?
        } else {
            vec![0.0; 2 * hd]
        };

        let mut z = build_context(&h_m, &h_s0, &h_att, &sample.target.info)?;
        if !self.cfg.use_physical_info {
            let n = z.len();
            z[n - OBJECT_ENC_DIM..].fill(0.0);
        }
        Ok(z)
    }

    /// Evaluation-mode prediction for a sample already in the target frame,
    /// with a pre-rendered raster.
    pub fn predict_prepared(
        &self,
        sample: &Sample,
        raster: Option<&RasterImage>,
    ) -> Result<PredictionSet, ModelError> {
        let z = self.context_for(sample, raster)?;
        let modes = self.bank.decode(&z, &self.norm)?;
        let logits: Vec<f64> = modes.iter().map(|m| m.logit).collect();
        let probabilities = mode_probabilities(&logits);
        Ok(PredictionSet {
            modes: modes.into_iter().map(|m| m.waypoints).collect(),
            probabilities,
        })
    }

    /// Normalizes, rasterizes and predicts one raw sample.
    pub fn predict(&self, sample: &Sample) -> Result<PredictionSet, ModelError> {
        let local = to_target_frame(sample)?;
        let raster = if self.cfg.use_map {
            Some(rasterize(&local, &self.cfg.raster)?)
        } else {
            None
        };
        self.predict_prepared(&local, raster.as_ref())
    }

    /// One batched forward/backward pass; gradients accumulate into the
    /// parameter tensors and the mean loss is returned.
    pub fn train_step(
        &mut self,
        batch: &TrainBatch,
        rng: &mut ChaCha8Rng,
    ) -> Result<LossBreakdown, ModelError> {
        let bsz = batch.bsz;
        let dm = self.cfg.encoder.map_feature_dim;
        let hd = self.cfg.encoder.lstm_hidden;
        let ctx_dim = self.cfg.ctx_dim();
        let k = self.k();

        // ---- forward ----
        let mut h_m = vec![0.0; bsz * dm];
        let mut map_caches = Vec::new();
        if self.cfg.use_map {
            for b in 0..bsz {
                let (hm, cache) = self.map_enc.forward_image(batch.rasters[b].clone());
                h_m[b * dm..(b + 1) * dm].copy_from_slice(&hm);
                map_caches.push(cache);
            }
            check_finite("map_feature", &h_m)?;
        }

        let (h_s0, target_cache) =
            self.track_enc
                .forward_batch(batch.target_inputs.clone(), bsz, true, Some(rng));
        check_finite("target_track_feature", &h_s0)?;

        let m_total = batch.neighbor_mask.len();
        let attention_on = self.cfg.use_distance_attention || self.cfg.use_area_attention;
        let (neighbor_feats, neighbor_cache) = if attention_on && m_total > 0 {
            let (f, c) = self.track_enc.forward_batch(
                batch.neighbor_inputs.clone(),
                m_total,
                true,
                Some(rng),
            );
            check_finite("neighbor_track_feature", &f)?;
            (f, Some(c))
        } else {
            (Vec::new(), None)
        };

        // attention per sample
        let mut h_att = vec![0.0; bsz * 2 * hd];
        let mut att_ctxs: Vec<Option<(AttentionCtx, Vec<Vec<f64>>)>> = Vec::with_capacity(bsz);
        for b in 0..bsz {
            let (start, end) = batch.neighbor_spans[b];
            if !attention_on || start == end {
                att_ctxs.push(None);
                continue;
            }
            let v: Vec<Vec<f64>> = (start..end)
                .map(|m| neighbor_feats[m * hd..(m + 1) * hd].to_vec())
                .collect();
            let ns = NeighborSet {
                q_pos: batch.q_pos[b],
                k_pos: batch.neighbor_pos[start..end].to_vec(),
                q_area: batch.q_area[b],
                k_area: batch.neighbor_area[start..end].to_vec(),
                v,
                mask: batch.neighbor_mask[start..end].to_vec(),
            };
            let (h_dist, h_area, ctx) = forward_ctx(&ns, &self.attention)?;
            if self.cfg.use_distance_attention {
                h_att[b * 2 * hd..b * 2 * hd + hd].copy_from_slice(&h_dist);
            }
            if self.cfg.use_area_attention {
                h_att[b * 2 * hd + hd..(b + 1) * 2 * hd].copy_from_slice(&h_area);
            }
            att_ctxs.push(Some((ctx, ns.v)));
        }
        check_finite("attention_feature", &h_att)?;

        // context
        let mut z = vec![0.0; bsz * ctx_dim];
        for b in 0..bsz {
            let o_enc = if self.cfg.use_physical_info {
                crate::decoder::encode_object_info(&batch.target_info[b])
            } else {
                [0.0; OBJECT_ENC_DIM]
            };
            let row = &mut z[b * ctx_dim..(b + 1) * ctx_dim];
            row[..dm].copy_from_slice(&h_m[b * dm..(b + 1) * dm]);
            row[dm..dm + hd].copy_from_slice(&h_s0[b * hd..(b + 1) * hd]);
            row[dm + hd..dm + 3 * hd].copy_from_slice(&h_att[b * 2 * hd..(b + 1) * 2 * hd]);
            row[dm + 3 * hd..].copy_from_slice(&o_enc);
        }
        check_finite("context", &z)?;

        // decoders
        let stride = 2 * T_F;
        let mut waypoints = vec![0.0; bsz * k * stride];
        let mut logits = vec![0.0; bsz * k];
        let mut dec_caches: Vec<ModeDecoderCache> = Vec::with_capacity(k);
        for (ki, dec) in self.bank.decoders.iter().enumerate() {
            let (wp, lg, cache) = dec.forward_batch(&z, bsz, &self.norm);
            for b in 0..bsz {
                waypoints[(b * k + ki) * stride..(b * k + ki + 1) * stride]
                    .copy_from_slice(&wp[b * stride..(b + 1) * stride]);
                logits[b * k + ki] = lg[b];
            }
            dec_caches.push(cache);
        }
        check_finite("trajectory_head", &waypoints)?;
        check_finite("score_logits", &logits)?;

        let loss = mtp_loss_batch(&waypoints, &logits, &batch.gts, bsz, k, &self.cfg.loss);
        if !loss.mean.total.is_finite() {
            return Err(ModelError::NonFinite {
                role: "loss".into(),
            });
        }

        // ---- backward ----
        let mut g_z = vec![0.0; bsz * ctx_dim];
        for (ki, dec) in self.bank.decoders.iter_mut().enumerate() {
            let mut g_wp = vec![0.0; bsz * stride];
            let mut g_lg = vec![0.0; bsz];
            for b in 0..bsz {
                g_wp[b * stride..(b + 1) * stride].copy_from_slice(
                    &loss.g_waypoints[(b * k + ki) * stride..(b * k + ki + 1) * stride],
                );
                g_lg[b] = loss.g_logits[b * k + ki];
            }
            dec.backward_batch(&z, &dec_caches[ki], &g_wp, &g_lg, &self.norm, &mut g_z);
        }

        // split context gradients
        let mut g_hm = vec![0.0; bsz * dm];
        let mut g_hs0 = vec![0.0; bsz * hd];
        let mut g_neighbor_feats = vec![0.0; neighbor_feats.len()];
        for b in 0..bsz {
            let row = &g_z[b * ctx_dim..(b + 1) * ctx_dim];
            g_hm[b * dm..(b + 1) * dm].copy_from_slice(&row[..dm]);
            g_hs0[b * hd..(b + 1) * hd].copy_from_slice(&row[dm..dm + hd]);

            if let Some((ctx, v)) = &att_ctxs[b] {
                let (start, end) = batch.neighbor_spans[b];
                let zero = vec![0.0; hd];
                let g_h_dist: &[f64] = if self.cfg.use_distance_attention {
                    &row[dm + hd..dm + 2 * hd]
                } else {
                    &zero
                };
                let g_h_area: &[f64] = if self.cfg.use_area_attention {
                    &row[dm + 2 * hd..dm + 3 * hd]
                } else {
                    &zero
                };
                let mut g_v: Vec<Vec<f64>> = vec![vec![0.0; hd]; end - start];
                backward_ctx(ctx, v, g_h_dist, g_h_area, &mut self.attention, &mut g_v);
                for (mi, gv) in (start..end).zip(g_v.iter()) {
                    for (dst, src) in g_neighbor_feats[mi * hd..(mi + 1) * hd]
                        .iter_mut()
                        .zip(gv.iter())
                    {
                        *dst += src;
                    }
                }
            }
        }

        if let Some(cache) = &neighbor_cache {
            self.track_enc
                .backward_batch(cache, &g_neighbor_feats, false);
        }
        self.track_enc.backward_batch(&target_cache, &g_hs0, false);

        if self.cfg.use_map {
            for b in 0..bsz {
                self.map_enc
                    .backward_image(&map_caches[b], &g_hm[b * dm..(b + 1) * dm]);
            }
        }

        Ok(loss.mean)
    }

    // ---- checkpoint io ----

    const MAGIC: &'static [u8; 4] = b"MCST";
    const VERSION: u32 = 1;

    pub fn save<P: AsRef<Path>>(&mut self, path: P) -> Result<(), ModelError> {
        #[derive(Serialize)]
        struct Meta<'a> {
            config: &'a ModelConfig,
            norm: &'a Normalizer,
        }
        let meta = serde_json::to_vec(&Meta {
            config: &self.cfg,
            norm: &self.norm,
        })
        .map_err(|e| ModelError::Format(e.to_string()))?;

        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);

        struct Writer<'a>(&'a mut Vec<u8>, u64);
        impl ParamVisitor for Writer<'_> {
            fn visit(&mut self, name: &str, tensor: &mut crate::nn::PTensor) {
                let nb = name.as_bytes();
                self.0.extend_from_slice(&(nb.len() as u16).to_le_bytes());
                self.0.extend_from_slice(nb);
                self.0
                    .extend_from_slice(&(tensor.len() as u64).to_le_bytes());
                for v in &tensor.v {
                    self.0.extend_from_slice(&v.to_le_bytes());
                }
                self.1 += 1;
            }
        }
        let mut body = Vec::new();
        let mut w = Writer(&mut body, 0);
        self.visit_params("", &mut w);
        let count = w.1;
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&body);

        let mut f = std::fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], ModelError> {
            if *pos + n > bytes.len() {
                return Err(ModelError::Format("truncated checkpoint".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };

        if take(&mut pos, 4)? != Self::MAGIC {
            return Err(ModelError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != Self::VERSION {
            return Err(ModelError::Format(format!("unsupported version {version}")));
        }
        let meta_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        #[derive(Deserialize)]
        struct Meta {
            config: ModelConfig,
            norm: Normalizer,
        }
        let meta: Meta = serde_json::from_slice(take(&mut pos, meta_len)?)
            .map_err(|e| ModelError::Format(format!("meta: {e}")))?;

        let mut model = PredictionModel::new(meta.config, 0);
        model.norm = meta.norm;

        let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let mut tensors: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
        for _ in 0..count {
            let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
                .map_err(|_| ModelError::Format("bad tensor name".into()))?;
            let len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
            let raw = take(&mut pos, len * 8)?;
            let vals = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(name, vals);
        }

        struct Loader {
            tensors: std::collections::BTreeMap<String, Vec<f64>>,
            error: Option<String>,
        }
        impl ParamVisitor for Loader {
            fn visit(&mut self, name: &str, tensor: &mut crate::nn::PTensor) {
                match self.tensors.remove(name) {
                    Some(vals) if vals.len() == tensor.len() => tensor.v = vals,
                    Some(vals) => {
                        self.error.get_or_insert(format!(
                            "tensor {name}: stored {} values, model expects {}",
                            vals.len(),
                            tensor.len()
                        ));
                    }
                    None => {
                        self.error
                            .get_or_insert(format!("tensor {name} missing from checkpoint"));
                    }
                }
            }
        }
        let mut loader = Loader {
            tensors,
            error: None,
        };
        model.visit_params("", &mut loader);
        if let Some(e) = loader.error {
            return Err(ModelError::Format(e));
        }
        if let Some(extra) = loader.tensors.keys().next() {
            return Err(ModelError::Format(format!(
                "unknown tensor {extra} in checkpoint"
            )));
        }
        Ok(model)
    }
}

/// Converts one track's flat (t x feat) buffer to the time-major layout used
/// by the sequence layers (identity for a single sequence).
fn to_time_major(x: &[f64], _bsz: usize) -> Vec<f64> {
    x.to_vec()
}

fn check_finite(role: &str, xs: &[f64]) -> Result<(), ModelError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { role: role.into() })
    }
}

/// One assembled training batch in model-ready layout.
pub struct TrainBatch {
    pub bsz: usize,
    /// Per-sample channels-last raster inputs (empty when the map is off).
    pub rasters: Vec<Vec<f64>>,
    /// Time-major (T x B x feats) standardized target histories.
    pub target_inputs: Vec<f64>,
    /// Time-major (T x M x feats) standardized neighbor histories.
    pub neighbor_inputs: Vec<f64>,
    /// Per-sample [start, end) range into the flattened neighbor axis.
    pub neighbor_spans: Vec<(usize, usize)>,
    pub neighbor_pos: Vec<Point2>,
    pub neighbor_area: Vec<f64>,
    pub neighbor_mask: Vec<bool>,
    pub q_pos: Vec<Point2>,
    pub q_area: Vec<f64>,
    pub target_info: Vec<ObjectInfo>,
    /// Ground truth futures, meters, (B x 2T_F).
    pub gts: Vec<f64>,
}

impl TrainBatch {
    /// Assembles a batch from samples already in the target frame.
    pub fn assemble(
        samples: &[&Sample],
        rasters: &[Option<&RasterImage>],
        norm: &Normalizer,
        cfg: &ModelConfig,
    ) -> Result<TrainBatch, ModelError> {
        let bsz = samples.len();
        let feats = TRACK_FEATS;
        let mut target_rows: Vec<Vec<f64>> = Vec::with_capacity(bsz);
        let mut neighbor_rows: Vec<Vec<f64>> = Vec::new();
        let mut spans = Vec::with_capacity(bsz);
        let mut neighbor_pos = Vec::new();
        let mut neighbor_area = Vec::new();
        let mut neighbor_mask = Vec::new();
        let mut q_pos = Vec::with_capacity(bsz);
        let mut q_area = Vec::with_capacity(bsz);
        let mut target_info = Vec::with_capacity(bsz);
        let mut gts = Vec::with_capacity(bsz * 2 * T_F);
        let mut raster_inputs = Vec::with_capacity(bsz);

        let attention_on = cfg.use_distance_attention || cfg.use_area_attention;
        for (si, s) in samples.iter().enumerate() {
            target_rows.push(standardized_track_input(&s.target, norm)?);
            let start = neighbor_rows.len();
            if attention_on {
                for n in &s.neighbors {
                    neighbor_rows.push(standardized_track_input(n, norm)?);
                    let st = n.current_state().unwrap();
                    neighbor_pos.push(Point2::new(st.x, st.y));
                    neighbor_area.push(n.info.area());
                    neighbor_mask.push(*n.valid.last().unwrap_or(&false));
                }
            }
            spans.push((start, neighbor_rows.len()));

            let cur = s.target.current_state().unwrap();
            q_pos.push(Point2::new(cur.x, cur.y));
            q_area.push(s.target.info.area());
            target_info.push(s.target.info);
            for p in &s.future {
                gts.push(p.x);
                gts.push(p.y);
            }
            if cfg.use_map {
                let raster = rasters[si].expect("map path needs rasters");
                raster_inputs.push(raster_input(raster));
            }
        }

        let time_major = |rows: &[Vec<f64>]| -> Vec<f64> {
            let m = rows.len();
            let mut out = vec![0.0; HISTORY_LEN * m * feats];
            for (bi, row) in rows.iter().enumerate() {
                for t in 0..HISTORY_LEN {
                    out[(t * m + bi) * feats..(t * m + bi + 1) * feats]
                        .copy_from_slice(&row[t * feats..(t + 1) * feats]);
                }
            }
            out
        };

        Ok(TrainBatch {
            bsz,
            rasters: raster_inputs,
            target_inputs: time_major(&target_rows),
            neighbor_inputs: time_major(&neighbor_rows),
            neighbor_spans: spans,
            neighbor_pos,
            neighbor_area,
            neighbor_mask,
            q_pos,
            q_area,
            target_info,
            gts,
        })
    }
}
