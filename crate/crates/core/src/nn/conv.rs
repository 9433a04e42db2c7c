//! Convolutions and pooling over channels-last buffers.

use rand_chacha::ChaCha8Rng;

use super::linalg::{add_bias, matmul, matmul_acc, matmul_at_b_acc, sum_rows_acc, transpose_into};
use super::{PTensor, ParamVisitor, Visitable};

/// 2D convolution over a single image laid out as (h x w x in_c).
///
/// Runs as im2col followed by one matmul; the column matrix is rebuilt in the
/// backward pass instead of cached, trading a copy for memory.
#[derive(Debug, Clone)]
pub struct Conv2d {
    /// (k*k*in_c) x out_c
    pub w: PTensor,
    /// 1 x out_c
    pub b: PTensor,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = k * k * in_c;
        Conv2d {
            w: PTensor::xavier(fan_in, out_c, fan_in, out_c, rng),
            b: PTensor::zeros(1, out_c),
            in_c,
            out_c,
            k,
            stride,
            pad,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = self.out_hw(h, w);
        let q = self.k * self.k * self.in_c;
        let mut col = vec![0.0; oh * ow * q];
        let c = self.in_c;
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &mut col[(oy * ow + ox) * q..(oy * ow + ox + 1) * q];
                for ky in 0..self.k {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    for kx in 0..self.k {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                            let src = ((iy as usize) * w + ix as usize) * c;
                            let dst = (ky * self.k + kx) * c;
                            row[dst..dst + c].copy_from_slice(&x[src..src + c]);
                        }
                    }
                }
            }
        }
        col
    }

    /// y: (oh*ow) x out_c
    pub fn forward(&self, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), h * w * self.in_c);
        let (oh, ow) = self.out_hw(h, w);
        let q = self.k * self.k * self.in_c;
        let col = self.im2col(x, h, w);
        let mut y = vec![0.0; oh * ow * self.out_c];
        matmul(&mut y, &col, &self.w.v, oh * ow, q, self.out_c);
        add_bias(&mut y, &self.b.v, oh * ow, self.out_c);
        y
    }

    pub fn backward(
        &mut self,
        x: &[f64],
        h: usize,
        w: usize,
        gy: &[f64],
        want_gx: bool,
    ) -> Option<Vec<f64>> {
        let (oh, ow) = self.out_hw(h, w);
        let p = oh * ow;
        let q = self.k * self.k * self.in_c;
        let col = self.im2col(x, h, w);
        matmul_at_b_acc(&mut self.w.g, &col, gy, p, q, self.out_c);
        sum_rows_acc(&mut self.b.g, gy, p, self.out_c);
        if !want_gx {
            return None;
        }
        let mut wt = vec![0.0; q * self.out_c];
        transpose_into(&mut wt, &self.w.v, q, self.out_c);
        let mut gcol = vec![0.0; p * q];
        matmul_acc(&mut gcol, gy, &wt, p, self.out_c, q);
        // col2im scatter-add
        let mut gx = vec![0.0; h * w * self.in_c];
        let c = self.in_c;
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &gcol[(oy * ow + ox) * q..(oy * ow + ox + 1) * q];
                for ky in 0..self.k {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    for kx in 0..self.k {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                            let dst = ((iy as usize) * w + ix as usize) * c;
                            let src = (ky * self.k + kx) * c;
                            for ci in 0..c {
                                gx[dst + ci] += row[src + ci];
                            }
                        }
                    }
                }
            }
        }
        Some(gx)
    }
}

impl Visitable for Conv2d {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        v.visit(&format!("{prefix}.w"), &mut self.w);
        v.visit(&format!("{prefix}.b"), &mut self.b);
    }
}

/// 1D convolution with same-length zero padding over time-major sequences
/// laid out as (t_len x bsz x in_c).
#[derive(Debug, Clone)]
pub struct Conv1d {
    /// (k*in_c) x out_c
    pub w: PTensor,
    pub b: PTensor,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
}

impl Conv1d {
    pub fn new(in_c: usize, out_c: usize, k: usize, rng: &mut ChaCha8Rng) -> Self {
        debug_assert!(k % 2 == 1, "same padding needs an odd kernel");
        let fan_in = k * in_c;
        Conv1d {
            w: PTensor::xavier(fan_in, out_c, fan_in, out_c, rng),
            b: PTensor::zeros(1, out_c),
            in_c,
            out_c,
            k,
        }
    }

    fn im2col(&self, x: &[f64], bsz: usize, t_len: usize) -> Vec<f64> {
        let q = self.k * self.in_c;
        let half = (self.k / 2) as isize;
        let c = self.in_c;
        let mut col = vec![0.0; t_len * bsz * q];
        for t in 0..t_len {
            for bi in 0..bsz {
                let row = &mut col[(t * bsz + bi) * q..(t * bsz + bi + 1) * q];
                for dk in 0..self.k {
                    let ti = t as isize + dk as isize - half;
                    if ti >= 0 && ti < t_len as isize {
                        let src = ((ti as usize) * bsz + bi) * c;
                        row[dk * c..(dk + 1) * c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
        col
    }

    /// y: (t_len x bsz x out_c)
    pub fn forward(&self, x: &[f64], bsz: usize, t_len: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), t_len * bsz * self.in_c);
        let rows = t_len * bsz;
        let q = self.k * self.in_c;
        let col = self.im2col(x, bsz, t_len);
        let mut y = vec![0.0; rows * self.out_c];
        matmul(&mut y, &col, &self.w.v, rows, q, self.out_c);
        add_bias(&mut y, &self.b.v, rows, self.out_c);
        y
    }

    pub fn backward(
        &mut self,
        x: &[f64],
        bsz: usize,
        t_len: usize,
        gy: &[f64],
        want_gx: bool,
    ) -> Option<Vec<f64>> {
        let rows = t_len * bsz;
        let q = self.k * self.in_c;
        let col = self.im2col(x, bsz, t_len);
        matmul_at_b_acc(&mut self.w.g, &col, gy, rows, q, self.out_c);
        sum_rows_acc(&mut self.b.g, gy, rows, self.out_c);
        if !want_gx {
            return None;
        }
        let mut wt = vec![0.0; q * self.out_c];
        transpose_into(&mut wt, &self.w.v, q, self.out_c);
        let mut gcol = vec![0.0; rows * q];
        matmul_acc(&mut gcol, gy, &wt, rows, self.out_c, q);
        let mut gx = vec![0.0; x.len()];
        let half = (self.k / 2) as isize;
        let c = self.in_c;
        for t in 0..t_len {
            for bi in 0..bsz {
                let row = &gcol[(t * bsz + bi) * q..(t * bsz + bi + 1) * q];
                for dk in 0..self.k {
                    let ti = t as isize + dk as isize - half;
                    if ti >= 0 && ti < t_len as isize {
                        let dst = ((ti as usize) * bsz + bi) * c;
                        for ci in 0..c {
                            gx[dst + ci] += row[dk * c + ci];
                        }
                    }
                }
            }
        }
        Some(gx)
    }
}

impl Visitable for Conv1d {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        v.visit(&format!("{prefix}.w"), &mut self.w);
        v.visit(&format!("{prefix}.b"), &mut self.b);
    }
}

/// Max pooling over (h x w x c); returns output, argmax indices and shape.
pub fn maxpool2d(
    x: &[f64],
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, Vec<usize>, usize, usize) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut y = vec![f64::NEG_INFINITY; oh * ow * c];
    let mut arg = vec![usize::MAX; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ky in 0..k {
                let iy = (oy * stride + ky) as isize - pad as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * stride + kx) as isize - pad as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let src = ((iy as usize) * w + ix as usize) * c;
                    let dst = (oy * ow + ox) * c;
                    for ci in 0..c {
                        if x[src + ci] > y[dst + ci] {
                            y[dst + ci] = x[src + ci];
                            arg[dst + ci] = src + ci;
                        }
                    }
                }
            }
        }
    }
    (y, arg, oh, ow)
}

pub fn maxpool2d_backward(gy: &[f64], arg: &[usize], gx_len: usize) -> Vec<f64> {
    let mut gx = vec![0.0; gx_len];
    for (g, &a) in gy.iter().zip(arg.iter()) {
        if a != usize::MAX {
            gx[a] += g;
        }
    }
    gx
}

/// Mean over all pixels per channel: (pixels x c) -> (c).
pub fn global_avg_pool(x: &[f64], pixels: usize, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; c];
    for p in 0..pixels {
        for (yv, xv) in y.iter_mut().zip(x[p * c..(p + 1) * c].iter()) {
            *yv += xv;
        }
    }
    for yv in &mut y {
        *yv /= pixels as f64;
    }
    y
}

pub fn global_avg_pool_backward(gy: &[f64], pixels: usize, c: usize) -> Vec<f64> {
    let mut gx = vec![0.0; pixels * c];
    for p in 0..pixels {
        for (gxv, gv) in gx[p * c..(p + 1) * c].iter_mut().zip(gy.iter()) {
            *gxv = gv / pixels as f64;
        }
    }
    gx
}
