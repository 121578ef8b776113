use std::collections::HashMap;

use ndarray::{Array2, Zip};

use super::tensor::{ParamId, ParamStore};
use crate::error::Result;

pub trait Optimizer {
    /// Applies one update to `ids` from their accumulated gradients and zeroes
    /// those gradients. Fails if any of them was not reached by a backward
    /// sweep since the previous step.
    fn step(&mut self, store: &mut ParamStore, ids: &[ParamId]) -> Result<()>;

    fn learning_rate(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty added to the gradient.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Moment estimates of one parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first: Array2<f64>,
    pub second: Array2<f64>,
    pub step: u64,
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    state: HashMap<ParamId, AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            state: HashMap::new(),
        }
    }

    pub fn state(&self, id: ParamId) -> Option<&AdamState> {
        self.state.get(&id)
    }
}

impl Optimizer for Adam {
    fn step(&mut self, store: &mut ParamStore, ids: &[ParamId]) -> Result<()> {
        for &id in ids {
            store.fresh_grad(id)?;
        }
        let c = self.config;
        for &id in ids {
            let st = self.state.entry(id).or_insert_with(|| {
                let shape = store.value(id).raw_dim();
                AdamState {
                    first: Array2::zeros(shape.clone()),
                    second: Array2::zeros(shape),
                    step: 0,
                }
            });
            st.step += 1;
            let bias1 = 1.0 - c.beta1.powi(st.step as i32);
            let bias2 = 1.0 - c.beta2.powi(st.step as i32);
            store.apply_update(id, |value, grad| {
                Zip::from(value)
                    .and(grad)
                    .and(&mut st.first)
                    .and(&mut st.second)
                    .for_each(|w, &g, m, v| {
                        let g = g + c.weight_decay * *w;
                        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        *w -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                    });
            });
        }
        Ok(())
    }

    fn learning_rate(&self) -> f64 {
        self.config.lr
    }
}

#[derive(Debug, Clone)]
pub struct AdaGrad {
    lr: f64,
    eps: f64,
    weight_decay: f64,
    sums: HashMap<ParamId, Array2<f64>>,
}

impl AdaGrad {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            eps: 1e-10,
            weight_decay,
            sums: HashMap::new(),
        }
    }
}

impl Optimizer for AdaGrad {
    fn step(&mut self, store: &mut ParamStore, ids: &[ParamId]) -> Result<()> {
        for &id in ids {
            store.fresh_grad(id)?;
        }
        let (lr, eps, wd) = (self.lr, self.eps, self.weight_decay);
        for &id in ids {
            let sum = self
                .sums
                .entry(id)
                .or_insert_with(|| Array2::zeros(store.value(id).raw_dim()));
            store.apply_update(id, |value, grad| {
                Zip::from(value).and(grad).and(sum).for_each(|w, &g, s| {
                    let g = g + wd * *w;
                    *s += g * g;
                    *w -= lr * g / (s.sqrt() + eps);
                });
            });
        }
        Ok(())
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }
}
