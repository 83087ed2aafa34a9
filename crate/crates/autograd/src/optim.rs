use std::f64::consts::PI;

use crate::params::ParamStore;
use crate::tensor::Tensor;

/// Linear warmup followed by cosine decay to `min_lr`.
#[derive(Clone, Debug)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub min_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl CosineSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if self.warmup_steps > 0 && step < self.warmup_steps {
            return self.base_lr * (step + 1) as f64 / self.warmup_steps as f64;
        }
        let span = self.total_steps.saturating_sub(self.warmup_steps).max(1);
        let progress = ((step - self.warmup_steps.min(step)) as f64 / span as f64).min(1.0);
        self.min_lr + 0.5 * (self.base_lr - self.min_lr) * (1.0 + (PI * progress).cos())
    }
}

#[derive(Clone, Debug)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam moments with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub step: usize,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamW {
    pub fn new(params: &ParamStore, config: AdamWConfig) -> Self {
        let first = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        let second = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    /// Applies one update from the accumulated gradient slots. Gradients are left untouched.
    pub fn update(&mut self, params: &mut ParamStore, lr: f64) {
        self.step += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            let w = p.value.data_mut();
            for (j, &g) in p.grad.data().iter().enumerate() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                w[j] -= lr * (mhat / (vhat.sqrt() + c.eps) + c.weight_decay * w[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_warms_up_then_decays() {
        let s = CosineSchedule {
            base_lr: 1e-3,
            min_lr: 0.0,
            warmup_steps: 10,
            total_steps: 110,
        };
        assert!((s.lr(0) - 1e-4).abs() < 1e-15);
        assert!((s.lr(9) - 1e-3).abs() < 1e-15);
        assert!((s.lr(10) - 1e-3).abs() < 1e-15);
        assert!((s.lr(60) - 5e-4).abs() < 1e-12);
        assert!(s.lr(110).abs() < 1e-15);
        assert!(s.lr(500).abs() < 1e-15);
    }

    #[test]
    fn adamw_minimizes_quadratic() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()).unwrap();
        let mut opt = AdamW::new(
            &store,
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
        );
        for _ in 0..2000 {
            let w = store.value(id).data().to_vec();
            let p = store.get_mut(id);
            for (g, w) in p.grad.data_mut().iter_mut().zip(&w) {
                *g = 2.0 * w;
            }
            opt.update(&mut store, 0.01);
        }
        assert!(store.value(id).data().iter().all(|w| w.abs() < 1e-2));
    }
}
