use crate::nn::{Grads, ParamSet};

/// Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Grads,
    pub v: Grads,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            m: params.zero_grads(),
            v: params.zero_grads(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected descent step along `grads`.
    pub fn update(&mut self, params: &mut ParamSet, grads: &Grads, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((tensor, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.m.0)
            .zip(&mut self.v.0)
        {
            for (((w, &gi), mi), vi) in tensor.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
