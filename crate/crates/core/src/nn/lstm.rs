//! LSTM layer with full backpropagation through time.
//!
//! Sequences are time-major: (t_len x bsz x dim). Gate order is [i, f, g, o].

use rand_chacha::ChaCha8Rng;

use super::linalg::{add_bias, matmul_acc, matmul_at_b_acc, sum_rows_acc, transpose_into};
use super::{sigmoid, PTensor, ParamVisitor, Visitable};

#[derive(Debug, Clone)]
pub struct Lstm {
    /// in_dim x 4H
    pub wx: PTensor,
    /// H x 4H
    pub wh: PTensor,
    /// 1 x 4H
    pub b: PTensor,
    pub in_dim: usize,
    pub hidden: usize,
}

/// Per-step activations kept for BPTT.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// t_len x bsz x 4H, post-activation gates [i f g o]
    pub gates: Vec<f64>,
    /// t_len x bsz x H cell states
    pub c: Vec<f64>,
    /// t_len x bsz x H tanh(cell)
    pub tanh_c: Vec<f64>,
    /// t_len x bsz x H hidden outputs
    pub h: Vec<f64>,
    pub bsz: usize,
    pub t_len: usize,
}

impl LstmCache {
    /// Hidden state of the last step, (bsz x H).
    pub fn last_h(&self) -> &[f64] {
        let h = self.h.len() / self.t_len;
        &self.h[(self.t_len - 1) * h..]
    }
}

impl Lstm {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut b = PTensor::zeros(1, 4 * hidden);
        // forget gate bias starts at 1
        for v in &mut b.v[hidden..2 * hidden] {
            *v = 1.0;
        }
        Lstm {
            wx: PTensor::xavier(in_dim, 4 * hidden, in_dim, hidden, rng),
            wh: PTensor::xavier(hidden, 4 * hidden, hidden, hidden, rng),
            b,
            in_dim,
            hidden,
        }
    }

    pub fn forward(&self, x: &[f64], bsz: usize, t_len: usize) -> LstmCache {
        debug_assert_eq!(x.len(), t_len * bsz * self.in_dim);
        let hd = self.hidden;
        let g4 = 4 * hd;
        let mut cache = LstmCache {
            gates: vec![0.0; t_len * bsz * g4],
            c: vec![0.0; t_len * bsz * hd],
            tanh_c: vec![0.0; t_len * bsz * hd],
            h: vec![0.0; t_len * bsz * hd],
            bsz,
            t_len,
        };
        let mut pre = vec![0.0; bsz * g4];
        for t in 0..t_len {
            pre.fill(0.0);
            let x_t = &x[t * bsz * self.in_dim..(t + 1) * bsz * self.in_dim];
            matmul_acc(&mut pre, x_t, &self.wx.v, bsz, self.in_dim, g4);
            if t > 0 {
                let h_prev = &cache.h[(t - 1) * bsz * hd..t * bsz * hd];
                matmul_acc(&mut pre, h_prev, &self.wh.v, bsz, hd, g4);
            }
            add_bias(&mut pre, &self.b.v, bsz, g4);

            for bi in 0..bsz {
                let row = &pre[bi * g4..(bi + 1) * g4];
                let gates = &mut cache.gates[(t * bsz + bi) * g4..(t * bsz + bi + 1) * g4];
                for j in 0..hd {
                    gates[j] = sigmoid(row[j]);
                    gates[hd + j] = sigmoid(row[hd + j]);
                    gates[2 * hd + j] = row[2 * hd + j].tanh();
                    gates[3 * hd + j] = sigmoid(row[3 * hd + j]);
                }
                let base = (t * bsz + bi) * hd;
                for j in 0..hd {
                    let c_prev = if t > 0 {
                        cache.c[((t - 1) * bsz + bi) * hd + j]
                    } else {
                        0.0
                    };
                    let c = gates[hd + j] * c_prev + gates[j] * gates[2 * hd + j];
                    let tc = c.tanh();
                    cache.c[base + j] = c;
                    cache.tanh_c[base + j] = tc;
                    cache.h[base + j] = gates[3 * hd + j] * tc;
                }
            }
        }
        cache
    }

    /// BPTT given gradients on the whole hidden sequence; accumulates
    /// parameter gradients and writes the input-sequence gradient into `gx`.
    pub fn backward(&mut self, x: &[f64], cache: &LstmCache, gh_seq: &[f64], gx: &mut [f64]) {
        let (bsz, t_len, hd) = (cache.bsz, cache.t_len, self.hidden);
        let g4 = 4 * hd;
        debug_assert_eq!(gh_seq.len(), t_len * bsz * hd);
        debug_assert_eq!(gx.len(), t_len * bsz * self.in_dim);

        let mut wxt = vec![0.0; self.in_dim * g4];
        transpose_into(&mut wxt, &self.wx.v, self.in_dim, g4);
        let mut wht = vec![0.0; hd * g4];
        transpose_into(&mut wht, &self.wh.v, hd, g4);

        let mut dh_next = vec![0.0; bsz * hd];
        let mut dc_next = vec![0.0; bsz * hd];
        let mut da = vec![0.0; bsz * g4];
        for t in (0..t_len).rev() {
            for bi in 0..bsz {
                let gates = &cache.gates[(t * bsz + bi) * g4..(t * bsz + bi + 1) * g4];
                let base = (t * bsz + bi) * hd;
                let da_row = &mut da[bi * g4..(bi + 1) * g4];
                for j in 0..hd {
                    let dh = gh_seq[base + j] + dh_next[bi * hd + j];
                    let i = gates[j];
                    let f = gates[hd + j];
                    let g = gates[2 * hd + j];
                    let o = gates[3 * hd + j];
                    let tc = cache.tanh_c[base + j];
                    let c_prev = if t > 0 {
                        cache.c[((t - 1) * bsz + bi) * hd + j]
                    } else {
                        0.0
                    };

                    let do_ = dh * tc;
                    let dc = dc_next[bi * hd + j] + dh * o * (1.0 - tc * tc);
                    let di = dc * g;
                    let dg = dc * i;
                    let df = dc * c_prev;
                    dc_next[bi * hd + j] = dc * f;

                    da_row[j] = di * i * (1.0 - i);
                    da_row[hd + j] = df * f * (1.0 - f);
                    da_row[2 * hd + j] = dg * (1.0 - g * g);
                    da_row[3 * hd + j] = do_ * o * (1.0 - o);
                }
            }

            let x_t = &x[t * bsz * self.in_dim..(t + 1) * bsz * self.in_dim];
            matmul_at_b_acc(&mut self.wx.g, x_t, &da, bsz, self.in_dim, g4);
            sum_rows_acc(&mut self.b.g, &da, bsz, g4);
            let gx_t = &mut gx[t * bsz * self.in_dim..(t + 1) * bsz * self.in_dim];
            gx_t.fill(0.0);
            matmul_acc(gx_t, &da, &wxt, bsz, g4, self.in_dim);

            dh_next.fill(0.0);
            if t > 0 {
                let h_prev = &cache.h[(t - 1) * bsz * hd..t * bsz * hd];
                matmul_at_b_acc(&mut self.wh.g, h_prev, &da, bsz, hd, g4);
                matmul_acc(&mut dh_next, &da, &wht, bsz, g4, hd);
            }
        }
    }
}

impl Visitable for Lstm {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        v.visit(&format!("{prefix}.wx"), &mut self.wx);
        v.visit(&format!("{prefix}.wh"), &mut self.wh);
        v.visit(&format!("{prefix}.b"), &mut self.b);
    }
}
