//! Learnable neighbor-interaction attention.
//!
//! Two attention channels over the encoded neighbor features: one keyed by
//! the relative distance between the target and each neighbor, one keyed by
//! the ratio of footprint areas (a physical stand-in for the object class).
//! Both carry learnable scalars, so the sharpness of each channel is trained
//! rather than fixed. Outputs are concatenated into `h_att`.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nn::{sigmoid, softmax_inplace, softplus, PTensor, ParamVisitor, Visitable};
use crate::scene::Point2;

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error("neighbor set arrays disagree in length")]
    LengthMismatch,
    #[error("neighbor {0} has non-positive area")]
    NonPositiveArea(usize),
    #[error("fuse inputs differ in length: {0} vs {1}")]
    FuseLength(usize, usize),
}

/// Learnable attention scalars.
///
/// The distance weight is stored pre-softplus so its effective value stays
/// positive; the distance itself is floored at `epsilon` to avoid the
/// singularity at coincident positions.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub alpha1: PTensor,
    pub w_dist_raw: PTensor,
    pub alpha2: PTensor,
    pub w_area: PTensor,
    pub epsilon: f64,
}

impl AttentionParams {
    /// Neutral initialization: every effective scalar starts at 1.
    pub fn new() -> Self {
        AttentionParams {
            alpha1: PTensor::scalar(1.0),
            // softplus(x) = 1  =>  x = ln(e - 1)
            w_dist_raw: PTensor::scalar((std::f64::consts::E - 1.0).ln()),
            alpha2: PTensor::scalar(1.0),
            w_area: PTensor::scalar(1.0),
            epsilon: 1e-6,
        }
    }

    pub fn effective_w_dist(&self) -> f64 {
        softplus(self.w_dist_raw.v[0])
    }

    pub fn snapshot(&self) -> [f64; 4] {
        [
            self.alpha1.v[0],
            self.effective_w_dist(),
            self.alpha2.v[0],
            self.w_area.v[0],
        ]
    }
}

impl Default for AttentionParams {
    fn default() -> Self {
        Self::new()
    }
}

impl Visitable for AttentionParams {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        v.visit(&format!("{prefix}.alpha1"), &mut self.alpha1);
        v.visit(&format!("{prefix}.w_dist_raw"), &mut self.w_dist_raw);
        v.visit(&format!("{prefix}.alpha2"), &mut self.alpha2);
        v.visit(&format!("{prefix}.w_area"), &mut self.w_area);
    }
}

/// Query/key/value view of one sample's neighbors at the current step.
#[derive(Debug, Clone)]
pub struct NeighborSet {
    /// Target position (the origin in the target frame).
    pub q_pos: Point2,
    /// Neighbor positions at the current step.
    pub k_pos: Vec<Point2>,
    /// Target footprint area, m^2.
    pub q_area: f64,
    /// Neighbor footprint areas.
    pub k_area: Vec<f64>,
    /// Encoded neighbor features, one per neighbor.
    pub v: Vec<Vec<f64>>,
    /// Validity flags; padded or absent neighbors are masked out.
    pub mask: Vec<bool>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.k_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_pos.is_empty()
    }

    fn check(&self) -> Result<(), AttentionError> {
        let n = self.k_pos.len();
        if self.k_area.len() != n || self.v.len() != n || self.mask.len() != n {
            return Err(AttentionError::LengthMismatch);
        }
        Ok(())
    }
}

fn masked_softmax(f: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut scores: Vec<f64> = f
        .iter()
        .zip(mask.iter())
        .map(|(v, m)| if *m { *v } else { f64::NEG_INFINITY })
        .collect();
    if mask.iter().any(|m| *m) {
        softmax_inplace(&mut scores);
        // exact zeros for masked entries
        for (s, m) in scores.iter_mut().zip(mask.iter()) {
            if !*m {
                *s = 0.0;
            }
        }
    } else {
        scores.fill(0.0);
    }
    scores
}

/// Distance-attention weights: `f_i = alpha1 / (W_dist * max(|q - k_i|, eps))`,
/// masked entries excluded, softmax over the rest. Empty when no neighbor is
/// valid.
pub fn dist_scores(ns: &NeighborSet, params: &AttentionParams) -> Result<Vec<f64>, AttentionError> {
    ns.check()?;
    if !ns.mask.iter().any(|m| *m) {
        return Ok(Vec::new());
    }
    let alpha1 = params.alpha1.v[0];
    let w = params.effective_w_dist();
    let f: Vec<f64> = ns
        .k_pos
        .iter()
        .map(|k| alpha1 / (w * ns.q_pos.dist(k).max(params.epsilon)))
        .collect();
    Ok(masked_softmax(&f, &ns.mask))
}

/// Area-attention weights: `f_i = alpha2 * W * (q_area / k_area_i)`.
pub fn area_scores(ns: &NeighborSet, params: &AttentionParams) -> Result<Vec<f64>, AttentionError> {
    ns.check()?;
    for (i, (a, m)) in ns.k_area.iter().zip(ns.mask.iter()).enumerate() {
        if *m && *a <= 0.0 {
            return Err(AttentionError::NonPositiveArea(i));
        }
    }
    if !ns.mask.iter().any(|m| *m) {
        return Ok(Vec::new());
    }
    let alpha2 = params.alpha2.v[0];
    let w = params.w_area.v[0];
    let f: Vec<f64> = ns
        .k_area
        .iter()
        .map(|a| alpha2 * w * (ns.q_area / a.max(1e-12)))
        .collect();
    Ok(masked_softmax(&f, &ns.mask))
}

fn weighted_sum(weights: &[f64], v: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (w, feat) in weights.iter().zip(v.iter()) {
        if *w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(feat.iter()) {
            *o += w * x;
        }
    }
    out
}

fn feature_dim(ns: &NeighborSet) -> usize {
    ns.v.first().map(|f| f.len()).unwrap_or(0)
}

/// Distance-attended neighbor feature; the zero vector when nothing is valid.
pub fn dist_att(ns: &NeighborSet, params: &AttentionParams) -> Result<Vec<f64>, AttentionError> {
    let w = dist_scores(ns, params)?;
    Ok(weighted_sum(&w, &ns.v, feature_dim(ns)))
}

/// Area-attended neighbor feature; the zero vector when nothing is valid.
pub fn area_att(ns: &NeighborSet, params: &AttentionParams) -> Result<Vec<f64>, AttentionError> {
    let w = area_scores(ns, params)?;
    Ok(weighted_sum(&w, &ns.v, feature_dim(ns)))
}

/// `h_att = [h_dist || h_area]`.
pub fn fuse(h_dist: &[f64], h_area: &[f64]) -> Result<Vec<f64>, AttentionError> {
    if h_dist.len() != h_area.len() {
        return Err(AttentionError::FuseLength(h_dist.len(), h_area.len()));
    }
    let mut out = Vec::with_capacity(h_dist.len() * 2);
    out.extend_from_slice(h_dist);
    out.extend_from_slice(h_area);
    Ok(out)
}

// ---------------------------------------------------------------------------
// training path
// ---------------------------------------------------------------------------

/// Everything the backward pass needs from one attention forward.
pub struct AttentionCtx {
    pub dist_w: Vec<f64>,
    pub area_w: Vec<f64>,
    pub dists: Vec<f64>,
    pub ratios: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Forward for training: returns (h_dist, h_area, ctx).
pub fn forward_ctx(
    ns: &NeighborSet,
    params: &AttentionParams,
) -> Result<(Vec<f64>, Vec<f64>, AttentionCtx), AttentionError> {
    let dist_w = dist_scores(ns, params)?;
    let area_w = area_scores(ns, params)?;
    let dim = feature_dim(ns);
    let h_dist = weighted_sum(&dist_w, &ns.v, dim);
    let h_area = weighted_sum(&area_w, &ns.v, dim);
    let ctx = AttentionCtx {
        dist_w,
        area_w,
        dists: ns
            .k_pos
            .iter()
            .map(|k| ns.q_pos.dist(k).max(params.epsilon))
            .collect(),
        ratios: ns.k_area.iter().map(|a| ns.q_area / a.max(1e-12)).collect(),
        mask: ns.mask.clone(),
    };
    Ok((h_dist, h_area, ctx))
}

/// Backward through both attention channels.
///
/// Accumulates gradients on the four scalars and on the neighbor features
/// (`g_v`), given gradients on the two attended outputs.
pub fn backward_ctx(
    ctx: &AttentionCtx,
    v: &[Vec<f64>],
    g_h_dist: &[f64],
    g_h_area: &[f64],
    params: &mut AttentionParams,
    g_v: &mut [Vec<f64>],
) {
    let n = ctx.mask.len();
    if ctx.dist_w.is_empty() {
        return; // nothing was valid
    }
    let alpha1 = params.alpha1.v[0];
    let w_dist = softplus(params.w_dist_raw.v[0]);
    let alpha2 = params.alpha2.v[0];
    let w_area = params.w_area.v[0];

    // distance channel
    let g_w: Vec<f64> = (0..n)
        .map(|i| {
            if ctx.mask[i] {
                crate::nn::linalg::dot(g_h_dist, &v[i])
            } else {
                0.0
            }
        })
        .collect();
    for (i, w) in ctx.dist_w.iter().enumerate() {
        if *w != 0.0 {
            for (gv, gh) in g_v[i].iter_mut().zip(g_h_dist.iter()) {
                *gv += w * gh;
            }
        }
    }
    let dot_wg: f64 = ctx.dist_w.iter().zip(g_w.iter()).map(|(a, b)| a * b).sum();
    for (((m, w), gw), d) in ctx.mask.iter().zip(&ctx.dist_w).zip(&g_w).zip(&ctx.dists) {
        if !m {
            continue;
        }
        let g_f = w * (gw - dot_wg);
        // f_i = alpha1 / (w_dist * d_i)
        params.alpha1.g[0] += g_f / (w_dist * d);
        params.w_dist_raw.g[0] +=
            g_f * (-alpha1 / (w_dist * w_dist * d)) * sigmoid(params.w_dist_raw.v[0]);
    }

    // area channel
    let g_wa: Vec<f64> = (0..n)
        .map(|i| {
            if ctx.mask[i] {
                crate::nn::linalg::dot(g_h_area, &v[i])
            } else {
                0.0
            }
        })
        .collect();
    for (i, w) in ctx.area_w.iter().enumerate() {
        if *w != 0.0 {
            for (gv, gh) in g_v[i].iter_mut().zip(g_h_area.iter()) {
                *gv += w * gh;
            }
        }
    }
    let dot_wga: f64 = ctx.area_w.iter().zip(g_wa.iter()).map(|(a, b)| a * b).sum();
    for (((m, w), gw), r) in ctx.mask.iter().zip(&ctx.area_w).zip(&g_wa).zip(&ctx.ratios) {
        if !m {
            continue;
        }
        let g_f = w * (gw - dot_wga);
        // f_i = alpha2 * w_area * r_i
        params.alpha2.g[0] += g_f * w_area * r;
        params.w_area.g[0] += g_f * alpha2 * r;
    }
}

/// Seeded helper for tests and gradient checks.
pub fn random_neighbor_set(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> NeighborSet {
    use rand::Rng;
    NeighborSet {
        q_pos: Point2::new(0.0, 0.0),
        k_pos: (0..n)
            .map(|_| Point2::new(rng.gen_range(-25.0..25.0), rng.gen_range(-25.0..25.0)))
            .collect(),
        q_area: rng.gen_range(2.0..25.0),
        k_area: (0..n).map(|_| rng.gen_range(0.3..30.0)).collect(),
        v: (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        mask: (0..n).map(|_| rng.gen_bool(0.85)).collect(),
    }
}
