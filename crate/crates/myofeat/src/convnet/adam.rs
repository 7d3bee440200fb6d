//! Adam with 64-bit master weights.
//!
//! Moments and the canonical parameter copy live in f64 regardless of the
//! network's working precision; each step updates the master vector and then
//! writes it back into the working parameters. This keeps long runs stable
//! in f32 and makes the update exactly reproducible across precisions.

use super::{Params, Real};

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    master: Vec<f64>,
}

impl Adam {
    /// Captures the initial parameters as the master copy.
    pub fn new<T: Real>(params: &Params<T>, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; params.data.len()],
            v: vec![0.0; params.data.len()],
            master: params.data.iter().map(|p| p.as_f64()).collect(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Divides the learning rate (used by the plateau schedule).
    pub fn anneal(&mut self, factor: f64) {
        self.lr /= factor;
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update; writes the new values into `params`.
    pub fn step<T: Real>(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        assert_eq!(grads.data.len(), self.master.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..self.master.len() {
            let g = grads.data[i].as_f64();
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            self.master[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            params.data[i] = T::from_f64(self.master[i]);
        }
    }
}
