use serde::{Deserialize, Serialize};

use super::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[Parameter]) -> Self {
        Self {
            m: params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Every parameter must hold a gradient;
/// gradients are cleared afterwards.
pub fn adam_step(params: &[Parameter], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::State(format!(
            "optimizer state tracks {} parameters, got {}",
            state.m.len(),
            params.len()
        )));
    }
    if let Some(p) = params.iter().find(|p| p.tensor.grad().is_none()) {
        return Err(Error::MissingGrad(p.name.clone()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (f64::from(cfg.beta1), f64::from(cfg.beta2));
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let (lr, eps) = (f64::from(cfg.lr), f64::from(cfg.eps));
    for (i, p) in params.iter().enumerate() {
        let g = p.tensor.take_grad().expect("checked above");
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        p.tensor.update_data(|w| {
            for j in 0..w.len() {
                let gj = f64::from(g[j]);
                let mj = b1 * f64::from(m[j]) + (1.0 - b1) * gj;
                let vj = b2 * f64::from(v[j]) + (1.0 - b2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let update = lr * (mj / bc1) / ((vj / bc2).sqrt() + eps);
                w[j] = (f64::from(w[j]) - update) as f32;
            }
        });
    }
    Ok(())
}

/// Exponential moving average of parameter values. The decay ramps up as
/// `min(decay, (1 + n) / (10 + n))` so early updates do not pin the average
/// to the initialization.
#[derive(Clone, Debug)]
pub struct WeightAverage {
    decay: f32,
    updates: u64,
    shadow: Vec<Vec<f32>>,
}

impl WeightAverage {
    pub fn new(params: &[Parameter], decay: f32) -> Self {
        Self {
            decay,
            updates: 0,
            shadow: params.iter().map(|p| p.tensor.to_vec()).collect(),
        }
    }

    pub fn update(&mut self, params: &[Parameter]) {
        let n = self.updates as f64;
        let d = f64::from(self.decay).min((1.0 + n) / (10.0 + n));
        for (s, p) in self.shadow.iter_mut().zip(params) {
            for (a, &w) in s.iter_mut().zip(p.tensor.data().iter()) {
                *a = (d * f64::from(*a) + (1.0 - d) * f64::from(w)) as f32;
            }
        }
        self.updates += 1;
    }

    /// Overwrite the parameters with their averages.
    pub fn copy_to(&self, params: &[Parameter]) -> Result<()> {
        if self.shadow.len() != params.len() {
            return Err(Error::State(format!(
                "weight average tracks {} parameters, got {}",
                self.shadow.len(),
                params.len()
            )));
        }
        for (s, p) in self.shadow.iter().zip(params) {
            p.tensor.set_data(s.clone())?;
        }
        Ok(())
    }
}

/// Rescale all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &[Parameter], max_norm: f32) -> f32 {
    let mut sq = 0f64;
    for p in params {
        p.tensor.with_grad_mut(|g| {
            if let Some(g) = g {
                sq += g.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>();
            }
        });
    }
    let norm = sq.sqrt();
    if norm > f64::from(max_norm) && norm > 0.0 {
        let s = (f64::from(max_norm) / norm) as f32;
        for p in params {
            p.tensor.with_grad_mut(|g| {
                if let Some(g) = g {
                    g.iter_mut().for_each(|v| *v *= s);
                }
            });
        }
    }
    norm as f32
}
