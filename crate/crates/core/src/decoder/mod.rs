//! Context assembly, K parallel trajectory/score decoders and the
//! winner-takes-all multi-mode loss.
//!
//! Each decoder owns a two-layer trajectory head and a score head that
//! re-encodes its predicted trajectory, concatenates the result with the
//! context and scores it; probabilities come from one softmax across the K
//! logits. The loss regresses only the mode closest to ground truth and
//! classifies which mode that was.

mod baseline;

pub use baseline::constant_velocity_baseline;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{EncoderParams, Normalizer, TrackEncoder, TrackEncoderCache};
use crate::nn::{
    elu_backward_from_output, elu_inplace, softmax_inplace, Dense, ParamVisitor, Visitable,
};
use crate::scene::{ObjectClass, ObjectInfo, Point2, T_F};

/// Dimensionality of the encoded physical info: one-hot class + (l, w).
pub const OBJECT_ENC_DIM: usize = ObjectClass::VOCABULARY.len() + 2;
/// Normalization constants for the target's physical dimensions.
pub const LENGTH_NORM_M: f64 = 10.0;
pub const WIDTH_NORM_M: f64 = 3.0;

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("context component length mismatch: h_att must be twice h_s0, got {h_att} vs {h_s0}")]
    ContextLengths { h_s0: usize, h_att: usize },
    #[error("context length {got} does not match decoder input {expected}")]
    ContextDim { expected: usize, got: usize },
    #[error("expected {expected} modes/probabilities, got {got}")]
    ModeCount { expected: usize, got: usize },
    #[error("mode {0} has {1} waypoints, expected {expected}", expected = T_F)]
    WaypointCount(usize, usize),
    #[error("ground truth is degenerate (non-finite or wrong length)")]
    DegenerateGroundTruth,
}

/// One-hot object class plus normalized length and width.
pub fn encode_object_info(info: &ObjectInfo) -> [f64; OBJECT_ENC_DIM] {
    let mut out = [0.0; OBJECT_ENC_DIM];
    out[info.object_class.index()] = 1.0;
    out[OBJECT_ENC_DIM - 2] = info.length / LENGTH_NORM_M;
    out[OBJECT_ENC_DIM - 1] = info.width / WIDTH_NORM_M;
    out
}

/// `z_l = [h_M || h_S0 || h_att || O_enc]`.
pub fn build_context(
    h_m: &[f64],
    h_s0: &[f64],
    h_att: &[f64],
    info: &ObjectInfo,
) -> Result<Vec<f64>, DecoderError> {
    if h_att.len() != 2 * h_s0.len() {
        return Err(DecoderError::ContextLengths {
            h_s0: h_s0.len(),
            h_att: h_att.len(),
        });
    }
    let mut z = Vec::with_capacity(h_m.len() + h_s0.len() + h_att.len() + OBJECT_ENC_DIM);
    z.extend_from_slice(h_m);
    z.extend_from_slice(h_s0);
    z.extend_from_slice(h_att);
    z.extend_from_slice(&encode_object_info(info));
    Ok(z)
}

/// One decoded mode: waypoints in meters plus an unnormalized score.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOutput {
    pub waypoints: Vec<Point2>,
    pub logit: f64,
}

/// Softmax across the K mode logits.
pub fn mode_probabilities(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    softmax_inplace(&mut p);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    /// Winner by minimum average displacement.
    MinAde,
    /// Winner by minimum final displacement.
    MinFde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtpLossConfig {
    pub alpha_reg: f64,
    pub selection: ModeSelection,
}

impl Default for MtpLossConfig {
    fn default() -> Self {
        MtpLossConfig {
            alpha_reg: 1.0,
            selection: ModeSelection::MinAde,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub regression: f64,
    pub classification: f64,
    pub total: f64,
    pub best_mode: usize,
}

fn avg_displacement(mode: &[Point2], gt: &[Point2]) -> f64 {
    mode.iter()
        .zip(gt.iter())
        .map(|(a, b)| a.dist(b))
        .sum::<f64>()
        / gt.len() as f64
}

fn pick_best(modes: &[ModeOutput], gt: &[Point2], selection: ModeSelection) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (k, m) in modes.iter().enumerate() {
        let val = match selection {
            ModeSelection::MinAde => avg_displacement(&m.waypoints, gt),
            ModeSelection::MinFde => m.waypoints[T_F - 1].dist(&gt[T_F - 1]),
        };
        // ties keep the lowest mode index
        if val < best_val {
            best_val = val;
            best = k;
        }
    }
    best
}

/// Winner-takes-all loss over one sample.
///
/// The best mode minimizes the selection criterion against ground truth (ties
/// to the lowest index); regression is the mean squared error over that
/// mode's `2 * T_F` coordinates; classification is the negative log
/// probability of the best mode.
pub fn mtp_loss(
    modes: &[ModeOutput],
    probabilities: &[f64],
    gt: &[Point2],
    cfg: &MtpLossConfig,
) -> Result<LossBreakdown, DecoderError> {
    if modes.len() != probabilities.len() {
        return Err(DecoderError::ModeCount {
            expected: modes.len(),
            got: probabilities.len(),
        });
    }
    if gt.len() != T_F || gt.iter().any(|p| !p.is_finite()) {
        return Err(DecoderError::DegenerateGroundTruth);
    }
    for (k, m) in modes.iter().enumerate() {
        if m.waypoints.len() != T_F {
            return Err(DecoderError::WaypointCount(k, m.waypoints.len()));
        }
    }
    let best = pick_best(modes, gt, cfg.selection);
    let regression = modes[best]
        .waypoints
        .iter()
        .zip(gt.iter())
        .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
        .sum::<f64>()
        / (2 * T_F) as f64;
    let classification = -probabilities[best].ln();
    Ok(LossBreakdown {
        regression,
        classification,
        total: classification + cfg.alpha_reg * regression,
        best_mode: best,
    })
}

// ---------------------------------------------------------------------------
// decoder bank
// ---------------------------------------------------------------------------

/// One of the K parallel decoders.
#[derive(Debug, Clone)]
pub struct ModeDecoder {
    pub traj_fc1: Dense,
    pub traj_fc2: Dense,
    /// Re-encodes the predicted (x, y) trajectory for scoring.
    pub score_enc: TrackEncoder,
    pub score_fc1: Dense,
    pub score_fc2: Dense,
}

pub struct ModeDecoderCache {
    h1: Vec<f64>,
    enc_cache: TrackEncoderCache,
    cat: Vec<f64>,
    s1: Vec<f64>,
    bsz: usize,
}

impl ModeDecoder {
    pub fn new(
        ctx_dim: usize,
        hidden: usize,
        enc_params: &EncoderParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let score_enc = TrackEncoder::new(2, T_F, enc_params, rng);
        let score_in = ctx_dim + score_enc.feature_dim();
        ModeDecoder {
            traj_fc1: Dense::new(ctx_dim, hidden, rng),
            traj_fc2: Dense::new(hidden, 2 * T_F, rng),
            score_enc,
            score_fc1: Dense::new(score_in, hidden, rng),
            score_fc2: Dense::new(hidden, 1, rng),
        }
    }

    pub fn ctx_dim(&self) -> usize {
        self.traj_fc1.in_dim()
    }

    /// Batched forward. Returns waypoints in meters (bsz x T_F x 2 flat) and
    /// per-sample logits.
    pub fn forward_batch(
        &self,
        z: &[f64],
        bsz: usize,
        norm: &Normalizer,
    ) -> (Vec<f64>, Vec<f64>, ModeDecoderCache) {
        let mut h1 = self.traj_fc1.forward(z, bsz);
        elu_inplace(&mut h1);
        let raw = self.traj_fc2.forward(&h1, bsz);

        // raw is the standardized trajectory; meters for the loss/output
        let mut waypoints = vec![0.0; bsz * 2 * T_F];
        for b in 0..bsz {
            for t in 0..T_F {
                let i = b * 2 * T_F + 2 * t;
                waypoints[i] = norm.future_mean[0] + norm.future_std[0] * raw[i];
                waypoints[i + 1] = norm.future_mean[1] + norm.future_std[1] * raw[i + 1];
            }
        }

        // time-major view for the score encoder
        let mut tm_raw = vec![0.0; T_F * bsz * 2];
        for b in 0..bsz {
            for t in 0..T_F {
                tm_raw[(t * bsz + b) * 2] = raw[b * 2 * T_F + 2 * t];
                tm_raw[(t * bsz + b) * 2 + 1] = raw[b * 2 * T_F + 2 * t + 1];
            }
        }
        let (enc, enc_cache) = self
            .score_enc
            .forward_batch(tm_raw.clone(), bsz, false, None);

        let ctx_dim = self.ctx_dim();
        let enc_dim = self.score_enc.feature_dim();
        let mut cat = vec![0.0; bsz * (ctx_dim + enc_dim)];
        for b in 0..bsz {
            cat[b * (ctx_dim + enc_dim)..b * (ctx_dim + enc_dim) + ctx_dim]
                .copy_from_slice(&z[b * ctx_dim..(b + 1) * ctx_dim]);
            cat[b * (ctx_dim + enc_dim) + ctx_dim..(b + 1) * (ctx_dim + enc_dim)]
                .copy_from_slice(&enc[b * enc_dim..(b + 1) * enc_dim]);
        }
        let mut s1 = self.score_fc1.forward(&cat, bsz);
        elu_inplace(&mut s1);
        let logits = self.score_fc2.forward(&s1, bsz);

        let cache = ModeDecoderCache {
            h1,
            enc_cache,
            cat,
            s1,
            bsz,
        };
        (waypoints, logits, cache)
    }

    /// Backward from meter-space waypoint gradients and logit gradients;
    /// accumulates into `g_z` (bsz x ctx_dim).
    pub fn backward_batch(
        &mut self,
        z: &[f64],
        cache: &ModeDecoderCache,
        g_waypoints: &[f64],
        g_logits: &[f64],
        norm: &Normalizer,
        g_z: &mut [f64],
    ) {
        let bsz = cache.bsz;
        let ctx_dim = self.ctx_dim();
        let enc_dim = self.score_enc.feature_dim();

        // score head
        let mut g_s1 = self
            .score_fc2
            .backward(&cache.s1, g_logits, bsz, true)
            .unwrap();
        elu_backward_from_output(&cache.s1, &mut g_s1);
        let g_cat = self
            .score_fc1
            .backward(&cache.cat, &g_s1, bsz, true)
            .unwrap();
        let mut g_enc = vec![0.0; bsz * enc_dim];
        for b in 0..bsz {
            let row = &g_cat[b * (ctx_dim + enc_dim)..(b + 1) * (ctx_dim + enc_dim)];
            for (gz, gr) in g_z[b * ctx_dim..(b + 1) * ctx_dim]
                .iter_mut()
                .zip(row[..ctx_dim].iter())
            {
                *gz += gr;
            }
            g_enc[b * enc_dim..(b + 1) * enc_dim].copy_from_slice(&row[ctx_dim..]);
        }
        let g_tm = self
            .score_enc
            .backward_batch(&cache.enc_cache, &g_enc, true)
            .unwrap();

        // total gradient on the standardized trajectory: score path + scaled
        // meter-space regression gradient
        let mut g_raw = vec![0.0; bsz * 2 * T_F];
        for b in 0..bsz {
            for t in 0..T_F {
                let i = b * 2 * T_F + 2 * t;
                g_raw[i] = g_tm[(t * bsz + b) * 2] + g_waypoints[i] * norm.future_std[0];
                g_raw[i + 1] =
                    g_tm[(t * bsz + b) * 2 + 1] + g_waypoints[i + 1] * norm.future_std[1];
            }
        }

        let mut g_h1 = self
            .traj_fc2
            .backward(&cache.h1, &g_raw, bsz, true)
            .unwrap();
        elu_backward_from_output(&cache.h1, &mut g_h1);
        let g_z_traj = self.traj_fc1.backward(z, &g_h1, bsz, true).unwrap();
        for (gz, gt) in g_z.iter_mut().zip(g_z_traj.iter()) {
            *gz += gt;
        }
    }
}

impl Visitable for ModeDecoder {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        self.traj_fc1.visit_params(&format!("{prefix}.traj_fc1"), v);
        self.traj_fc2.visit_params(&format!("{prefix}.traj_fc2"), v);
        self.score_enc
            .visit_params(&format!("{prefix}.score_enc"), v);
        self.score_fc1
            .visit_params(&format!("{prefix}.score_fc1"), v);
        self.score_fc2
            .visit_params(&format!("{prefix}.score_fc2"), v);
    }
}

/// K independent decoders sharing one input context.
#[derive(Debug, Clone)]
pub struct DecoderBank {
    pub decoders: Vec<ModeDecoder>,
}

impl DecoderBank {
    pub fn new(
        k: usize,
        ctx_dim: usize,
        hidden: usize,
        enc_params: &EncoderParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        DecoderBank {
            decoders: (0..k)
                .map(|_| ModeDecoder::new(ctx_dim, hidden, enc_params, rng))
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.decoders.len()
    }

    /// Evaluation-mode decoding of one context vector.
    pub fn decode(&self, z: &[f64], norm: &Normalizer) -> Result<Vec<ModeOutput>, DecoderError> {
        let expected = self.decoders[0].ctx_dim();
        if z.len() != expected {
            return Err(DecoderError::ContextDim {
                expected,
                got: z.len(),
            });
        }
        let mut out = Vec::with_capacity(self.k());
        for dec in &self.decoders {
            let (wp, logits, _) = dec.forward_batch(z, 1, norm);
            let waypoints = (0..T_F)
                .map(|t| Point2::new(wp[2 * t], wp[2 * t + 1]))
                .collect();
            out.push(ModeOutput {
                waypoints,
                logit: logits[0],
            });
        }
        Ok(out)
    }
}

impl Visitable for DecoderBank {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        for (i, d) in self.decoders.iter_mut().enumerate() {
            d.visit_params(&format!("{prefix}.mode{i}"), v);
        }
    }
}

/// Gradients of the mean winner-takes-all loss over a batch.
pub struct MtpBatchResult {
    /// Mean loss components over the batch.
    pub mean: LossBreakdown,
    /// Per-sample winning mode.
    pub best: Vec<usize>,
    /// bsz x k x 2T_F meter-space waypoint grads (non-best modes zero).
    pub g_waypoints: Vec<f64>,
    /// bsz x k logit grads.
    pub g_logits: Vec<f64>,
}

/// Batched loss + gradients: waypoints (bsz x k x 2T_F meters), logits
/// (bsz x k), ground truth (bsz x 2T_F meters).
pub fn mtp_loss_batch(
    waypoints: &[f64],
    logits: &[f64],
    gts: &[f64],
    bsz: usize,
    k: usize,
    cfg: &MtpLossConfig,
) -> MtpBatchResult {
    let stride = 2 * T_F;
    let mut g_waypoints = vec![0.0; bsz * k * stride];
    let mut g_logits = vec![0.0; bsz * k];
    let mut best = Vec::with_capacity(bsz);
    let (mut reg_sum, mut cls_sum) = (0.0, 0.0);

    for b in 0..bsz {
        let gt = &gts[b * stride..(b + 1) * stride];
        // winner by the configured displacement criterion
        let mut best_k = 0;
        let mut best_val = f64::INFINITY;
        for ki in 0..k {
            let wp = &waypoints[(b * k + ki) * stride..(b * k + ki + 1) * stride];
            let val = match cfg.selection {
                ModeSelection::MinAde => {
                    let mut s = 0.0;
                    for t in 0..T_F {
                        let dx = wp[2 * t] - gt[2 * t];
                        let dy = wp[2 * t + 1] - gt[2 * t + 1];
                        s += (dx * dx + dy * dy).sqrt();
                    }
                    s / T_F as f64
                }
                ModeSelection::MinFde => {
                    let dx = wp[stride - 2] - gt[stride - 2];
                    let dy = wp[stride - 1] - gt[stride - 1];
                    (dx * dx + dy * dy).sqrt()
                }
            };
            if val < best_val {
                best_val = val;
                best_k = ki;
            }
        }
        best.push(best_k);

        let wp = &waypoints[(b * k + best_k) * stride..(b * k + best_k + 1) * stride];
        let mut reg = 0.0;
        for i in 0..stride {
            let d = wp[i] - gt[i];
            reg += d * d;
            g_waypoints[(b * k + best_k) * stride + i] =
                cfg.alpha_reg * 2.0 * d / (stride as f64 * bsz as f64);
        }
        reg /= stride as f64;
        reg_sum += reg;

        let mut p = logits[b * k..(b + 1) * k].to_vec();
        softmax_inplace(&mut p);
        cls_sum += -p[best_k].max(1e-300).ln();
        for ki in 0..k {
            let indicator = if ki == best_k { 1.0 } else { 0.0 };
            g_logits[b * k + ki] = (p[ki] - indicator) / bsz as f64;
        }
    }

    let bs = bsz as f64;
    let mean = LossBreakdown {
        regression: reg_sum / bs,
        classification: cls_sum / bs,
        total: cls_sum / bs + cfg.alpha_reg * reg_sum / bs,
        best_mode: best[0],
    };
    MtpBatchResult {
        mean,
        best,
        g_waypoints,
        g_logits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::DEFAULT_K;
    use rand::{Rng, SeedableRng};

    #[test]
    fn object_encoding_example() {
        let info = ObjectInfo::new(ObjectClass::Car, 4.5, 2.0);
        let z = build_context(&[0.0; 128], &[0.0; 128], &[0.0; 256], &info).unwrap();
        assert_eq!(z.len(), 521);
        assert_eq!(z[512], 1.0); // car one-hot slot
        assert!(z[513..519].iter().all(|v| *v == 0.0));
        assert!((z[519] - 0.45).abs() < 1e-12);
        assert!((z[520] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn context_ordering_and_length_checks() {
        let h_m: Vec<f64> = (0..128).map(|i| i as f64).collect();
        let info = ObjectInfo::new(ObjectClass::Truck, 8.0, 2.4);
        let z = build_context(&h_m, &[0.5; 128], &[0.25; 256], &info).unwrap();
        assert_eq!(&z[..128], &h_m[..]);
        assert!(z[128..256].iter().all(|v| *v == 0.5));
        assert!(z[256..512].iter().all(|v| *v == 0.25));
        assert!(build_context(&h_m, &[0.0; 128], &[0.0; 100], &info).is_err());
    }

    #[test]
    fn probabilities_examples() {
        let p = mode_probabilities(&[1.0; 5]);
        assert!(p.iter().all(|v| (v - 0.2).abs() < 1e-12));

        let p = mode_probabilities(&[3.0_f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);

        let shifted = mode_probabilities(&[3.0_f64.ln() + 7.0, 7.0]);
        assert!((shifted[0] - p[0]).abs() < 1e-9);
    }

    fn line_mode(dy: f64) -> ModeOutput {
        ModeOutput {
            waypoints: (1..=T_F).map(|t| Point2::new(t as f64, dy)).collect(),
            logit: 0.0,
        }
    }

    fn gt_line() -> Vec<Point2> {
        (1..=T_F).map(|t| Point2::new(t as f64, 0.0)).collect()
    }

    #[test]
    fn mtp_loss_examples() {
        let cfg = MtpLossConfig::default();
        let gt = gt_line();

        // one mode exactly equals gt
        let modes = vec![line_mode(0.0), line_mode(3.0)];
        let out = mtp_loss(&modes, &[0.6, 0.4], &gt, &cfg).unwrap();
        assert_eq!(out.best_mode, 0);
        assert_eq!(out.regression, 0.0);
        assert!((out.total - (-0.6_f64.ln())).abs() < 1e-9);
        assert!((out.total - 0.5108).abs() < 1e-3);

        // equidistant modes tie-break to index 0
        let modes = vec![line_mode(1.0), line_mode(-1.0)];
        let out = mtp_loss(&modes, &[0.5, 0.5], &gt, &cfg).unwrap();
        assert_eq!(out.best_mode, 0);
        assert!((out.regression - 0.5).abs() < 1e-12); // mean of dy^2 over 2T_F coords

        // degenerate gt rejected
        let mut bad = gt_line();
        bad[3] = Point2::new(f64::NAN, 0.0);
        assert!(mtp_loss(&modes, &[0.5, 0.5], &bad, &cfg).is_err());
    }

    #[test]
    fn loss_nonnegative_and_wta_locality() {
        let cfg = MtpLossConfig::default();
        let gt = gt_line();
        let modes = vec![line_mode(0.2), line_mode(5.0)];
        let base = mtp_loss(&modes, &[0.5, 0.5], &gt, &cfg).unwrap();
        assert!(base.total >= 0.0 && base.regression >= 0.0 && base.classification >= 0.0);

        // perturbing the non-best mode leaves regression unchanged
        let mut perturbed = modes.clone();
        perturbed[1].waypoints[4] = Point2::new(100.0, -50.0);
        let out = mtp_loss(&perturbed, &[0.5, 0.5], &gt, &cfg).unwrap();
        assert_eq!(out.regression, base.regression);
        assert_eq!(out.best_mode, base.best_mode);
    }

    #[test]
    fn decode_shapes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let params = EncoderParams::default();
        let bank = DecoderBank::new(DEFAULT_K, 521, 256, &params, &mut rng);
        let norm = Normalizer::identity();
        let z: Vec<f64> = (0..521).map(|i| (i as f64 * 0.37).sin() * 0.3).collect();
        let modes = bank.decode(&z, &norm).unwrap();
        assert_eq!(modes.len(), 5);
        for m in &modes {
            assert_eq!(m.waypoints.len(), T_F);
            assert!(m.waypoints.iter().all(|p| p.is_finite()));
            assert!(m.logit.is_finite());
        }
        let again = bank.decode(&z, &norm).unwrap();
        assert_eq!(modes, again);
        assert!(bank.decode(&z[..100], &norm).is_err());
    }

    #[test]
    fn decoder_gradcheck_through_both_heads() {
        use crate::nn::{grad_rel_error, param_names, with_param, PTensor};
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let enc_params = EncoderParams::tiny_for_tests();
        let ctx_dim = 11;
        let k = 2;
        let mut bank = DecoderBank::new(k, ctx_dim, 6, &enc_params, &mut rng);
        let norm = Normalizer {
            feat_mean: [0.0; 5],
            feat_std: [1.0; 5],
            future_mean: [0.4, -0.2],
            future_std: [2.0, 1.5],
        };
        let cfg = MtpLossConfig::default();
        let bsz = 2;
        let z: Vec<f64> = (0..bsz * ctx_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let gts: Vec<f64> = (0..bsz * 2 * T_F)
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();

        let loss_of = |bank: &DecoderBank| -> f64 {
            let mut wps = vec![0.0; bsz * k * 2 * T_F];
            let mut logits = vec![0.0; bsz * k];
            for (ki, dec) in bank.decoders.iter().enumerate() {
                let (wp, lg, _) = dec.forward_batch(&z, bsz, &norm);
                for b in 0..bsz {
                    let dst = (b * k + ki) * 2 * T_F;
                    wps[dst..dst + 2 * T_F].copy_from_slice(&wp[b * 2 * T_F..(b + 1) * 2 * T_F]);
                    logits[b * k + ki] = lg[b];
                }
            }
            mtp_loss_batch(&wps, &logits, &gts, bsz, k, &cfg).mean.total
        };

        // analytic gradients
        let mut wps = vec![0.0; bsz * k * 2 * T_F];
        let mut logits = vec![0.0; bsz * k];
        let mut caches = Vec::new();
        for (ki, dec) in bank.decoders.iter().enumerate() {
            let (wp, lg, cache) = dec.forward_batch(&z, bsz, &norm);
            for b in 0..bsz {
                let dst = (b * k + ki) * 2 * T_F;
                wps[dst..dst + 2 * T_F].copy_from_slice(&wp[b * 2 * T_F..(b + 1) * 2 * T_F]);
                logits[b * k + ki] = lg[b];
            }
            caches.push(cache);
        }
        let grads = mtp_loss_batch(&wps, &logits, &gts, bsz, k, &cfg);
        let mut g_z = vec![0.0; bsz * ctx_dim];
        for (ki, dec) in bank.decoders.iter_mut().enumerate() {
            let mut g_wp = vec![0.0; bsz * 2 * T_F];
            let mut g_lg = vec![0.0; bsz];
            for b in 0..bsz {
                let src = (b * k + ki) * 2 * T_F;
                g_wp[b * 2 * T_F..(b + 1) * 2 * T_F]
                    .copy_from_slice(&grads.g_waypoints[src..src + 2 * T_F]);
                g_lg[b] = grads.g_logits[b * k + ki];
            }
            dec.backward_batch(&z, &caches[ki], &g_wp, &g_lg, &norm, &mut g_z);
        }

        let mut worst = 0.0f64;
        for (name, len) in param_names(&mut bank) {
            for idx in [0, len / 2, len - 1] {
                let analytic = with_param(&mut bank, &name, |t: &mut PTensor| t.g[idx]);
                let v0 = with_param(&mut bank, &name, |t: &mut PTensor| t.v[idx]);
                let h = 1e-5;
                let mut b2 = bank.clone();
                with_param(&mut b2, &name, |t: &mut PTensor| t.v[idx] = v0 + h);
                let fp = loss_of(&b2);
                with_param(&mut b2, &name, |t: &mut PTensor| t.v[idx] = v0 - h);
                let fm = loss_of(&b2);
                let num = (fp - fm) / (2.0 * h);
                let err = grad_rel_error(analytic, num);
                worst = worst.max(err);
                assert!(
                    err < 1e-4,
                    "{name}[{idx}]: analytic {analytic} vs fd {num} (err {err})"
                );
            }
        }
        assert!(worst < 1e-4, "worst decoder grad error {worst}");
    }
}
