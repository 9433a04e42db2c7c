//! Map encoder: CNN backbone, global average pooling, one dense layer.

use rand_chacha::ChaCha8Rng;

use crate::nn::conv::{global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward};
use crate::nn::{elu_backward_from_output, elu_inplace, Conv2d, Dense, ParamVisitor, Visitable};
use crate::raster::RasterImage;

use super::{BackboneKind, EncoderError, EncoderParams, MapFeature};

/// Raster bytes scaled to [0, 1], channels-last.
pub fn raster_input(img: &RasterImage) -> Vec<f64> {
    img.data.iter().map(|b| *b as f64 / 255.0).collect()
}

// ---------------------------------------------------------------------------
// tiny backbone
// ---------------------------------------------------------------------------

/// Four stride-2 3x3 convolutions with ELU, pooled to a channel vector.
#[derive(Debug, Clone)]
pub struct TinyCnn {
    pub convs: Vec<Conv2d>,
}

pub struct TinyCnnCache {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    dims: Vec<(usize, usize)>,
    out_pixels: usize,
}

impl TinyCnn {
    pub fn new(channels: [usize; 4], rng: &mut ChaCha8Rng) -> Self {
        let mut convs = Vec::with_capacity(4);
        let mut in_c = 3;
        for out_c in channels {
            convs.push(Conv2d::new(in_c, out_c, 3, 2, 1, rng));
            in_c = out_c;
        }
        TinyCnn { convs }
    }

    pub fn out_dim(&self) -> usize {
        self.convs.last().unwrap().out_c
    }

    pub fn forward(&self, x: Vec<f64>, h: usize, w: usize) -> (Vec<f64>, TinyCnnCache) {
        let mut cache = TinyCnnCache {
            inputs: Vec::with_capacity(4),
            outputs: Vec::with_capacity(4),
            dims: Vec::with_capacity(4),
            out_pixels: 0,
        };
        let (mut cur, mut ch, mut cw) = (x, h, w);
        for conv in &self.convs {
            let mut y = conv.forward(&cur, ch, cw);
            elu_inplace(&mut y);
            let (oh, ow) = conv.out_hw(ch, cw);
            cache.dims.push((ch, cw));
            cache.inputs.push(std::mem::replace(&mut cur, y.clone()));
            cache.outputs.push(y);
            ch = oh;
            cw = ow;
        }
        cache.out_pixels = ch * cw;
        let feat = global_avg_pool(&cur, cache.out_pixels, self.out_dim());
        (feat, cache)
    }

    pub fn backward(&mut self, cache: &TinyCnnCache, g_feat: &[f64]) {
        let mut gy = global_avg_pool_backward(g_feat, cache.out_pixels, self.out_dim());
        for li in (0..self.convs.len()).rev() {
            elu_backward_from_output(&cache.outputs[li], &mut gy);
            let (h, w) = cache.dims[li];
            let gx = self.convs[li].backward(&cache.inputs[li], h, w, &gy, li > 0);
            if let Some(gx) = gx {
                gy = gx;
            }
        }
    }
}

impl Visitable for TinyCnn {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        for (i, conv) in self.convs.iter_mut().enumerate() {
            conv.visit_params(&format!("{prefix}.conv{i}"), v);
        }
    }
}

// ---------------------------------------------------------------------------
// residual backbone
// ---------------------------------------------------------------------------

/// Pre-activation-free bottleneck: 1x1 reduce, 3x3, 1x1 expand, ELU after the
/// residual add. The expanding conv starts at zero so deep stacks are stable
/// without normalization layers.
#[derive(Debug, Clone)]
pub struct Bottleneck {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
    pub proj: Option<Conv2d>,
}

pub struct BottleneckCache {
    x: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
    out: Vec<f64>,
    in_hw: (usize, usize),
    mid_hw: (usize, usize),
}

impl Bottleneck {
    pub fn new(
        in_c: usize,
        mid_c: usize,
        out_c: usize,
        stride: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let conv1 = Conv2d::new(in_c, mid_c, 1, 1, 0, rng);
        let conv2 = Conv2d::new(mid_c, mid_c, 3, stride, 1, rng);
        let mut conv3 = Conv2d::new(mid_c, out_c, 1, 1, 0, rng);
        conv3.w.v.fill(0.0);
        let proj = if in_c != out_c || stride != 1 {
            Some(Conv2d::new(in_c, out_c, 1, stride, 0, rng))
        } else {
            None
        };
        Bottleneck {
            conv1,
            conv2,
            conv3,
            proj,
        }
    }

    fn forward(
        &self,
        x: Vec<f64>,
        h: usize,
        w: usize,
    ) -> (Vec<f64>, usize, usize, BottleneckCache) {
        let mut y1 = self.conv1.forward(&x, h, w);
        elu_inplace(&mut y1);
        let mut y2 = self.conv2.forward(&y1, h, w);
        elu_inplace(&mut y2);
        let (oh, ow) = self.conv2.out_hw(h, w);
        let mut out = self.conv3.forward(&y2, oh, ow);
        match &self.proj {
            Some(p) => {
                let shortcut = p.forward(&x, h, w);
                for (o, s) in out.iter_mut().zip(shortcut.iter()) {
                    *o += s;
                }
            }
            None => {
                for (o, s) in out.iter_mut().zip(x.iter()) {
                    *o += s;
                }
            }
        }
        elu_inplace(&mut out);
        let cache = BottleneckCache {
            x,
            y1,
            y2,
            out: out.clone(),
            in_hw: (h, w),
            mid_hw: (oh, ow),
        };
        (out, oh, ow, cache)
    }

    fn backward(
        &mut self,
        cache: &BottleneckCache,
        mut gout: Vec<f64>,
        want_gx: bool,
    ) -> Option<Vec<f64>> {
        let (h, w) = cache.in_hw;
        let (oh, ow) = cache.mid_hw;
        elu_backward_from_output(&cache.out, &mut gout);
        let mut gy2 = self.conv3.backward(&cache.y2, oh, ow, &gout, true).unwrap();
        elu_backward_from_output(&cache.y2, &mut gy2);
        let mut gy1 = self.conv2.backward(&cache.y1, h, w, &gy2, true).unwrap();
        elu_backward_from_output(&cache.y1, &mut gy1);
        let gx_main = self.conv1.backward(&cache.x, h, w, &gy1, want_gx);
        let gx_short = match &mut self.proj {
            Some(p) => p.backward(&cache.x, h, w, &gout, want_gx),
            None => Some(gout),
        };
        match (gx_main, gx_short) {
            (Some(mut a), Some(b)) => {
                for (av, bv) in a.iter_mut().zip(b.iter()) {
                    *av += bv;
                }
                Some(a)
            }
            (None, Some(b)) if self.proj.is_none() && want_gx => Some(b),
            _ => None,
        }
    }
}

impl Visitable for Bottleneck {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        self.conv1.visit_params(&format!("{prefix}.c1"), v);
        self.conv2.visit_params(&format!("{prefix}.c2"), v);
        self.conv3.visit_params(&format!("{prefix}.c3"), v);
        if let Some(p) = &mut self.proj {
            p.visit_params(&format!("{prefix}.proj"), v);
        }
    }
}

/// Bottleneck-residual backbone; the canonical 50-layer plan pools to 2048.
#[derive(Debug, Clone)]
pub struct ResidualCnn {
    pub stem: Conv2d,
    pub blocks: Vec<Bottleneck>,
    out_dim: usize,
}

pub struct ResidualCnnCache {
    x: Vec<f64>,
    in_hw: (usize, usize),
    stem_out: Vec<f64>,
    pool_arg: Vec<usize>,
    pool_len: usize,
    blocks: Vec<BottleneckCache>,
    out_pixels: usize,
}

impl ResidualCnn {
    /// The 50-layer plan: stem + [3, 4, 6, 3] bottlenecks.
    pub fn resnet50(rng: &mut ChaCha8Rng) -> Self {
        Self::with_plan(
            64,
            &[
                (3, 64, 256, 1),
                (4, 128, 512, 2),
                (6, 256, 1024, 2),
                (3, 512, 2048, 2),
            ],
            rng,
        )
    }

    /// Miniature plan with identical wiring, for gradient checks.
    pub fn mini_for_tests(rng: &mut ChaCha8Rng) -> Self {
        Self::with_plan(4, &[(2, 3, 6, 1), (1, 4, 8, 2)], rng)
    }

    pub fn with_plan(
        stem_c: usize,
        stages: &[(usize, usize, usize, usize)],
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let stem = Conv2d::new(3, stem_c, 7, 2, 3, rng);
        let mut blocks = Vec::new();
        let mut in_c = stem_c;
        for &(count, mid, out, stride) in stages {
            for b in 0..count {
                let s = if b == 0 { stride } else { 1 };
                blocks.push(Bottleneck::new(in_c, mid, out, s, rng));
                in_c = out;
            }
        }
        ResidualCnn {
            stem,
            blocks,
            out_dim: in_c,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, x: Vec<f64>, h: usize, w: usize) -> (Vec<f64>, ResidualCnnCache) {
        let mut stem_out = self.stem.forward(&x, h, w);
        elu_inplace(&mut stem_out);
        let (sh, sw) = self.stem.out_hw(h, w);
        let (pooled, arg, ph, pw) = maxpool2d(&stem_out, sh, sw, self.stem.out_c, 3, 2, 1);

        let mut cache = ResidualCnnCache {
            x,
            in_hw: (h, w),
            stem_out,
            pool_arg: arg,
            pool_len: sh * sw * self.stem.out_c,
            blocks: Vec::with_capacity(self.blocks.len()),
            out_pixels: 0,
        };
        let (mut cur, mut ch, mut cw) = (pooled, ph, pw);
        for block in &self.blocks {
            let (y, oh, ow, bc) = block.forward(cur, ch, cw);
            cache.blocks.push(bc);
            cur = y;
            ch = oh;
            cw = ow;
        }
        cache.out_pixels = ch * cw;
        let feat = global_avg_pool(&cur, cache.out_pixels, self.out_dim);
        (feat, cache)
    }

    pub fn backward(&mut self, cache: &ResidualCnnCache, g_feat: &[f64]) {
        let mut gy = global_avg_pool_backward(g_feat, cache.out_pixels, self.out_dim);
        for bi in (0..self.blocks.len()).rev() {
            gy = self.blocks[bi]
                .backward(&cache.blocks[bi], gy, true)
                .unwrap();
        }
        let mut g_stem = maxpool2d_backward(&gy, &cache.pool_arg, cache.pool_len);
        elu_backward_from_output(&cache.stem_out, &mut g_stem);
        let (ih, iw) = cache.in_hw;
        self.stem.backward(&cache.x, ih, iw, &g_stem, false);
    }
}

impl Visitable for ResidualCnn {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        self.stem.visit_params(&format!("{prefix}.stem"), v);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_params(&format!("{prefix}.block{i}"), v);
        }
    }
}

// ---------------------------------------------------------------------------
// map encoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Backbone {
    Tiny(TinyCnn),
    Residual(ResidualCnn),
}

pub enum BackboneCache {
    Tiny(TinyCnnCache),
    Residual(ResidualCnnCache),
}

/// CNN backbone -> pooled feature -> dense -> ELU -> h_M.
#[derive(Debug, Clone)]
pub struct MapEncoder {
    pub backbone: Backbone,
    pub fc: Dense,
    pub input_h: usize,
    pub input_w: usize,
}

pub struct MapEncoderCache {
    backbone: BackboneCache,
    pooled: Vec<f64>,
    h_m: Vec<f64>,
}

impl MapEncoder {
    pub fn new(
        params: &EncoderParams,
        input_h: usize,
        input_w: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let backbone = match params.backbone {
            BackboneKind::TinyCnn => Backbone::Tiny(TinyCnn::new(params.tiny_channels, rng)),
            BackboneKind::FullResidual50 => Backbone::Residual(ResidualCnn::resnet50(rng)),
        };
        let feat_dim = match &backbone {
            Backbone::Tiny(t) => t.out_dim(),
            Backbone::Residual(r) => r.out_dim(),
        };
        MapEncoder {
            backbone,
            fc: Dense::new(feat_dim, params.map_feature_dim, rng),
            input_h,
            input_w,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.fc.out_dim()
    }

    /// Channels-last [0,1] image of the configured shape.
    pub fn forward_image(&self, x: Vec<f64>) -> (Vec<f64>, MapEncoderCache) {
        let (pooled, backbone) = match &self.backbone {
            Backbone::Tiny(t) => {
                let (f, c) = t.forward(x, self.input_h, self.input_w);
                (f, BackboneCache::Tiny(c))
            }
            Backbone::Residual(r) => {
                let (f, c) = r.forward(x, self.input_h, self.input_w);
                (f, BackboneCache::Residual(c))
            }
        };
        let mut h_m = self.fc.forward(&pooled, 1);
        elu_inplace(&mut h_m);
        let cache = MapEncoderCache {
            backbone,
            pooled,
            h_m: h_m.clone(),
        };
        (h_m, cache)
    }

    pub fn backward_image(&mut self, cache: &MapEncoderCache, g_hm: &[f64]) {
        let mut g = g_hm.to_vec();
        elu_backward_from_output(&cache.h_m, &mut g);
        let g_pooled = self.fc.backward(&cache.pooled, &g, 1, true).unwrap();
        match (&mut self.backbone, &cache.backbone) {
            (Backbone::Tiny(t), BackboneCache::Tiny(c)) => t.backward(c, &g_pooled),
            (Backbone::Residual(r), BackboneCache::Residual(c)) => r.backward(c, &g_pooled),
            _ => unreachable!("cache kind matches backbone"),
        }
    }

    /// Evaluation-mode encoding of one raster.
    pub fn encode(&self, raster: &RasterImage) -> Result<MapFeature, EncoderError> {
        if raster.height != self.input_h || raster.width != self.input_w {
            return Err(EncoderError::RasterShape {
                expected: (self.input_h, self.input_w),
                got: (raster.height, raster.width),
            });
        }
        let (h_m, _) = self.forward_image(raster_input(raster));
        Ok(MapFeature(h_m))
    }
}

impl Visitable for MapEncoder {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        match &mut self.backbone {
            Backbone::Tiny(t) => t.visit_params(&format!("{prefix}.tiny"), v),
            Backbone::Residual(r) => r.visit_params(&format!("{prefix}.res"), v),
        }
        self.fc.visit_params(&format!("{prefix}.fc"), v);
    }
}
