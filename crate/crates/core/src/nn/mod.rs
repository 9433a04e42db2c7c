//! Minimal deterministic f64 neural-network substrate.
//!
//! Every layer hand-wires its forward and backward pass over flat `Vec<f64>`
//! buffers; there is no autodiff graph. All gradients are verified against
//! central finite differences in tests. The whole numeric path is
//! single-threaded and allocation-order deterministic, so runs with the same
//! seed reproduce exactly.

pub mod conv;
pub mod dense;
pub mod linalg;
pub mod lstm;
pub mod optim;

pub use conv::{Conv1d, Conv2d};
pub use dense::Dense;
pub use lstm::{Lstm, LstmCache};
pub use optim::Nadam;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A parameter tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct PTensor {
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl PTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PTensor {
            v: vec![0.0; rows * cols],
            g: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn scalar(x: f64) -> Self {
        PTensor {
            v: vec![x],
            g: vec![0.0],
            rows: 1,
            cols: 1,
        }
    }

    /// Xavier-uniform init with the given fan-in/out.
    pub fn xavier(
        rows: usize,
        cols: usize,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let v: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
        PTensor {
            g: vec![0.0; v.len()],
            v,
            rows,
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(0.0);
    }
}

/// Visitor over every named parameter tensor of a component.
pub trait ParamVisitor {
    fn visit(&mut self, name: &str, tensor: &mut PTensor);
}

/// Anything holding parameters: layers and composites.
pub trait Visitable {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor);
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

/// ELU (alpha = 1) applied in place; backward recovers the slope from the output.
pub fn elu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = v.exp_m1();
        }
    }
}

/// grad *= dELU/dx given the ELU output y.
pub fn elu_backward_from_output(y: &[f64], grad: &mut [f64]) {
    for (g, yv) in grad.iter_mut().zip(y.iter()) {
        if *yv < 0.0 {
            *g *= yv + 1.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softplus(x: f64) -> f64 {
    // numerically stable ln(1 + e^x)
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Max-subtracted softmax in place.
pub fn softmax_inplace(x: &mut [f64]) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// gx = y .* (gy - dot(y, gy)) for y = softmax(x).
pub fn softmax_backward(y: &[f64], gy: &[f64], gx: &mut [f64]) {
    let dot: f64 = y.iter().zip(gy.iter()).map(|(a, b)| a * b).sum();
    for ((gx, y), gy) in gx.iter_mut().zip(y.iter()).zip(gy.iter()) {
        *gx = y * (gy - dot);
    }
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

/// Inverted-dropout mask; kept activations are scaled by 1/(1-p).
#[derive(Debug, Clone)]
pub struct DropoutMask {
    pub keep: Vec<bool>,
    pub scale: f64,
}

pub fn dropout_forward(x: &mut [f64], p: f64, rng: &mut ChaCha8Rng) -> DropoutMask {
    debug_assert!((0.0..1.0).contains(&p));
    let scale = 1.0 / (1.0 - p);
    let keep: Vec<bool> = (0..x.len()).map(|_| rng.gen::<f64>() >= p).collect();
    for (v, k) in x.iter_mut().zip(keep.iter()) {
        *v = if *k { *v * scale } else { 0.0 };
    }
    DropoutMask { keep, scale }
}

pub fn dropout_backward(mask: &DropoutMask, g: &mut [f64]) {
    for (v, k) in g.iter_mut().zip(mask.keep.iter()) {
        *v = if *k { *v * mask.scale } else { 0.0 };
    }
}

// ---------------------------------------------------------------------------
// finite differences
// ---------------------------------------------------------------------------

/// Every parameter tensor name and length of a component, in visit order.
pub fn param_names<M: Visitable>(m: &mut M) -> Vec<(String, usize)> {
    struct Collector(Vec<(String, usize)>);
    impl ParamVisitor for Collector {
        fn visit(&mut self, name: &str, tensor: &mut PTensor) {
            self.0.push((name.to_string(), tensor.len()));
        }
    }
    let mut c = Collector(Vec::new());
    m.visit_params("", &mut c);
    c.0
}

/// Runs a closure on one named parameter tensor.
pub fn with_param<M: Visitable, R>(m: &mut M, name: &str, f: impl FnOnce(&mut PTensor) -> R) -> R {
    struct Finder<'a, F, R> {
        name: &'a str,
        f: Option<F>,
        out: Option<R>,
    }
    impl<F: FnOnce(&mut PTensor) -> R, R> ParamVisitor for Finder<'_, F, R> {
        fn visit(&mut self, name: &str, tensor: &mut PTensor) {
            if name == self.name {
                if let Some(f) = self.f.take() {
                    self.out = Some(f(tensor));
                }
            }
        }
    }
    let mut v = Finder {
        name,
        f: Some(f),
        out: None,
    };
    m.visit_params("", &mut v);
    v.out
        .unwrap_or_else(|| panic!("parameter {name} not found"))
}

/// Central finite-difference derivative of `f` at `x[i]`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &mut [f64], i: usize, h: f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let fp = f(x);
    x[i] = orig - h;
    let fm = f(x);
    x[i] = orig;
    (fp - fm) / (2.0 * h)
}

/// Relative error for gradient comparisons, with the denominator floored so
/// near-zero gradients are judged by absolute error. Central differences on
/// an O(1) loss resolve about 1e-9 absolute at step 1e-5; real gradient bugs
/// produce errors on the order of the gradient itself, far above the floor.
pub fn grad_rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn softmax_normalizes_and_shifts() {
        let mut a = vec![3.0_f64.ln(), 0.0];
        softmax_inplace(&mut a);
        assert!((a[0] - 0.75).abs() < 1e-12);
        assert!((a[1] - 0.25).abs() < 1e-12);

        let mut b = vec![3.0_f64.ln() + 10.0, 10.0];
        softmax_inplace(&mut b);
        assert!((b[0] - a[0]).abs() < 1e-9);
    }

    #[test]
    fn elu_backward_matches_fd() {
        let xs = [-1.5, -0.3, 0.0, 0.4, 2.0];
        for &x0 in &xs {
            let mut f = |x: &[f64]| {
                let mut y = vec![x[0]];
                elu_inplace(&mut y);
                y[0]
            };
            let mut x = vec![x0];
            let num = central_diff(&mut f, &mut x, 0, 1e-6);
            let mut y = vec![x0];
            elu_inplace(&mut y);
            let mut g = vec![1.0];
            elu_backward_from_output(&y, &mut g);
            assert!(
                grad_rel_error(g[0], num) < 1e-6,
                "x={x0}: {} vs {num}",
                g[0]
            );
        }
    }

    #[test]
    fn dropout_scales_kept_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = vec![1.0; 1000];
        let mask = dropout_forward(&mut x, 0.25, &mut rng);
        let kept = mask.keep.iter().filter(|k| **k).count();
        assert!((kept as f64 / 1000.0 - 0.75).abs() < 0.05);
        for (v, k) in x.iter().zip(mask.keep.iter()) {
            if *k {
                assert!((v - 1.0 / 0.75).abs() < 1e-12);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
