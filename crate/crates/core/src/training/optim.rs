//! AdamW with decoupled weight decay and the cosine learning-rate schedule.

use std::f64::consts::PI;

use crate::encoder::{EncoderConfig, EncoderParams};

/// `η_t = η_0 · ½ (1 + cos(π t / t_max))`, annealing to 0 at `t_max`.
pub fn cosine_lr(base: f64, step: usize, t_max: usize) -> f64 {
    if t_max == 0 {
        return base;
    }
    let frac = (step.min(t_max) as f64) / t_max as f64;
    base * 0.5 * (1.0 + (PI * frac).cos())
}

#[derive(Clone, Debug)]
pub struct AdamW {
    pub base_lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: EncoderParams,
    v: EncoderParams,
}

impl AdamW {
    pub fn new(config: &EncoderConfig, base_lr: f64, weight_decay: f64) -> Self {
        Self {
            base_lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: EncoderParams::zeros(config),
            v: EncoderParams::zeros(config),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update at learning rate `lr`. Weight decay is applied as
    /// `θ ← θ − lr·wd·θ` before the Adam step.
    pub fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let decay = 1.0 - lr * self.weight_decay;
        let eps = self.eps;
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in tensors {
            ndarray::Zip::from(&mut p)
                .and(&g)
                .and(&mut m)
                .and(&mut v)
                .for_each(|p, &g, m, v| {
                    *p *= decay;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
        }
    }
}
