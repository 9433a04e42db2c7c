//! Fully connected layer.

use rand_chacha::ChaCha8Rng;

use super::linalg::{add_bias, matmul, matmul_acc, matmul_at_b_acc, sum_rows_acc, transpose_into};
use super::{PTensor, ParamVisitor, Visitable};

#[derive(Debug, Clone)]
pub struct Dense {
    /// in_dim x out_dim
    pub w: PTensor,
    /// 1 x out_dim
    pub b: PTensor,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            w: PTensor::xavier(in_dim, out_dim, in_dim, out_dim, rng),
            b: PTensor::zeros(1, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.rows
    }

    pub fn out_dim(&self) -> usize {
        self.w.cols
    }

    /// y (rows x out) = x (rows x in) * w + b
    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut y = vec![0.0; rows * self.out_dim()];
        matmul(&mut y, x, &self.w.v, rows, self.in_dim(), self.out_dim());
        add_bias(&mut y, &self.b.v, rows, self.out_dim());
        y
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward(
        &mut self,
        x: &[f64],
        gy: &[f64],
        rows: usize,
        want_gx: bool,
    ) -> Option<Vec<f64>> {
        let (ind, out) = (self.in_dim(), self.out_dim());
        matmul_at_b_acc(&mut self.w.g, x, gy, rows, ind, out);
        sum_rows_acc(&mut self.b.g, gy, rows, out);
        if want_gx {
            let mut wt = vec![0.0; ind * out];
            transpose_into(&mut wt, &self.w.v, ind, out);
            let mut gx = vec![0.0; rows * ind];
            matmul_acc(&mut gx, gy, &wt, rows, out, ind);
            Some(gx)
        } else {
            None
        }
    }
}

impl Visitable for Dense {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        v.visit(&format!("{prefix}.w"), &mut self.w);
        v.visit(&format!("{prefix}.b"), &mut self.b);
    }
}
