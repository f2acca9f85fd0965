//! Adam optimizer with bias correction.

use super::tensor::{ParamSet, Tensor};
use crate::{cast, Real};

/// Adam state: first/second moment estimates per parameter plus the step
/// counter. Defaults are β1 = 0.9, β2 = 0.999, ε = 1e-8.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    t: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(lr: F) -> Self {
        Adam {
            lr,
            beta1: cast(0.9),
            beta2: cast(0.999),
            eps: cast(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_hyperparams(lr: F, beta1: F, beta2: F, eps: F) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn lr(&self) -> F {
        self.lr
    }

    /// Changes the learning rate (used for scheduled decay). Moment
    /// estimates are kept.
    pub fn set_lr(&mut self, lr: F) {
        self.lr = lr;
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update from the gradients accumulated in `params`; gradients are
    /// zeroed afterwards.
    pub fn step(&mut self, params: &mut ParamSet<F>) {
        if self.m.is_empty() {
            for id in params.ids() {
                let (r, c) = params.get(id).value.shape();
                self.m.push(Tensor::zeros(r, c));
                self.v.push(Tensor::zeros(r, c));
            }
        }
        assert_eq!(self.m.len(), params.len(), "optimizer bound to a different parameter set");

        self.t += 1;
        let t = cast::<F>(self.t as f64);
        let bc1 = F::one() - self.beta1.powf(t);
        let bc2 = F::one() - self.beta2.powf(t);

        for (i, id) in params.ids().enumerate() {
            let p = params.get_mut(id);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for ((theta, g), (mi, vi)) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mi = self.beta1 * *mi + (F::one() - self.beta1) * *g;
                *vi = self.beta2 * *vi + (F::one() - self.beta2) * *g * *g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        params.zero_grads();
    }
}
