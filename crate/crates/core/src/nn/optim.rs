//! Nesterov-accelerated Adam (Nadam) with a step learning-rate schedule.

use std::collections::BTreeMap;

use super::{PTensor, ParamVisitor, Visitable};

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Nadam: Adam moments with a Nesterov lookahead on the first moment.
#[derive(Debug, Clone)]
pub struct Nadam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    state: BTreeMap<String, Moments>,
}

impl Nadam {
    pub fn new(lr: f64) -> Self {
        Nadam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            state: BTreeMap::new(),
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// Applies one update to every visited parameter and clears gradients.
    pub fn step<M: Visitable>(&mut self, model: &mut M) {
        self.t += 1;
        let mut v = StepVisitor {
            t: self.t,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            state: &mut self.state,
        };
        model.visit_params("", &mut v);
    }
}

struct StepVisitor<'a> {
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    state: &'a mut BTreeMap<String, Moments>,
}

impl ParamVisitor for StepVisitor<'_> {
    fn visit(&mut self, name: &str, tensor: &mut PTensor) {
        let n = tensor.len();
        let st = self
            .state
            .entry(name.to_string())
            .or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
        debug_assert_eq!(st.m.len(), n, "parameter {name} changed size");

        let (b1, b2) = (self.beta1, self.beta2);
        let t = self.t as i32;
        let bc1 = 1.0 - b1.powi(t);
        let bc1_next = 1.0 - b1.powi(t + 1);
        let bc2 = 1.0 - b2.powi(t);
        for i in 0..n {
            let g = tensor.g[i];
            st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
            st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
            let m_hat = st.m[i] / bc1_next;
            let g_hat = g / bc1;
            let v_hat = st.v[i] / bc2;
            tensor.v[i] -= self.lr * (b1 * m_hat + (1.0 - b1) * g_hat) / (v_hat.sqrt() + self.eps);
        }
        tensor.zero_grad();
    }
}

/// Step-decay schedule: `base * gamma^(epoch / step_epochs)`.
pub fn step_decay_lr(base: f64, gamma: f64, step_epochs: usize, epoch: usize) -> f64 {
    base * gamma.powi((epoch / step_epochs.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad {
        p: PTensor,
    }

    impl Visitable for Quad {
        fn visit_params(&mut self, _prefix: &str, v: &mut dyn ParamVisitor) {
            v.visit("p", &mut self.p);
        }
    }

    #[test]
    fn converges_on_quadratic() {
        // minimize (p - 3)^2
        let mut q = Quad {
            p: PTensor::scalar(0.0),
        };
        let mut opt = Nadam::new(0.05);
        for _ in 0..600 {
            q.p.g[0] = 2.0 * (q.p.v[0] - 3.0);
            opt.step(&mut q);
        }
        assert!((q.p.v[0] - 3.0).abs() < 1e-3, "ended at {}", q.p.v[0]);
    }

    #[test]
    fn schedule_decays_every_step_epochs() {
        let lr0 = step_decay_lr(6e-4, 0.9, 2, 0);
        let lr1 = step_decay_lr(6e-4, 0.9, 2, 1);
        let lr2 = step_decay_lr(6e-4, 0.9, 2, 2);
        let lr4 = step_decay_lr(6e-4, 0.9, 2, 4);
        assert_eq!(lr0, 6e-4);
        assert_eq!(lr1, 6e-4);
        assert!((lr2 - 6e-4 * 0.9).abs() < 1e-18);
        assert!((lr4 - 6e-4 * 0.81).abs() < 1e-18);
    }

    #[test]
    fn grads_cleared_after_step() {
        let mut q = Quad {
            p: PTensor::scalar(1.0),
        };
        q.p.g[0] = 5.0;
        let mut opt = Nadam::new(0.01);
        opt.step(&mut q);
        assert_eq!(q.p.g[0], 0.0);
    }
}
