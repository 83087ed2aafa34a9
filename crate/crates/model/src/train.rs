use molpc_autograd::optim::{AdamW, AdamWConfig, CosineSchedule};
use molpc_autograd::Graph;
use serde::{Deserialize, Serialize};

use crate::data::EncodedExample;
use crate::error::ModelError;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub min_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            min_lr: 0.0,
            warmup_steps: 100,
            total_steps: 10_000,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
}

/// Token-weighted mean cross-entropy of one example and its target length.
pub fn example_loss(model: &Model, g: &mut Graph<'_>, ex: &EncodedExample) -> Result<(molpc_autograd::Var, usize), ModelError> {
    let logits = model.logits(g, &ex.input, ex.points.as_ref(), &ex.decoder_input())?;
    let mask = vec![true; ex.target.len()];
    Ok((g.cross_entropy(logits, &ex.target, &mask)?, ex.target.len()))
}

/// Mean per-token loss over a batch without touching gradients.
pub fn batch_loss(model: &Model, batch: &[&EncodedExample]) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let total: usize = batch.iter().map(|e| e.target.len()).sum();
    let mut loss = 0.0;
    for ex in batch {
        let mut g = Graph::new(&model.params);
        let (l, n) = example_loss(model, &mut g, ex)?;
        loss += g.value(l).item() * n as f64 / total as f64;
    }
    Ok(loss)
}

pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    pub step: usize,
    optimizer: AdamW,
    schedule: CosineSchedule,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Self {
        let optimizer = AdamW::new(
            &model.params,
            AdamWConfig {
                beta1: config.beta1,
                beta2: config.beta2,
                eps: config.adam_eps,
                weight_decay: config.weight_decay,
            },
        );
        let schedule = CosineSchedule {
            base_lr: config.lr,
            min_lr: config.min_lr,
            warmup_steps: config.warmup_steps,
            total_steps: config.total_steps,
        };
        Self {
            model,
            config,
            step: 0,
            optimizer,
            schedule,
        }
    }

    /// One optimizer update on the token-weighted mean loss of `batch`.
    pub fn train_step(&mut self, batch: &[&EncodedExample]) -> Result<StepStats, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        self.model.params.zero_grads();
        let total: usize = batch.iter().map(|e| e.target.len()).sum();
        let mut loss = 0.0;
        for ex in batch {
            let weight = ex.target.len() as f64 / total as f64;
            let grads = {
                let mut g = Graph::new(&self.model.params);
                let (l, _) = example_loss(&self.model, &mut g, ex)?;
                loss += g.value(l).item() * weight;
                g.backward_with_seed(l, weight)?
            };
            self.model.params.accumulate(&grads, 1.0);
        }
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { step: self.step, loss });
        }
        let mut sq = 0.0;
        for p in self.model.params.iter_mut().filter(|p| p.trainable) {
            sq += p.grad.data().iter().map(|x| x * x).sum::<f64>();
        }
        let grad_norm = sq.sqrt();
        if let Some(clip) = self.config.clip_norm {
            if grad_norm > clip {
                let s = clip / grad_norm;
                for p in self.model.params.iter_mut() {
                    p.grad.data_mut().iter_mut().for_each(|x| *x *= s);
                }
            }
        }
        let lr = self.schedule.lr(self.step);
        self.optimizer.update(&mut self.model.params, lr);
        let stats = StepStats {
            step: self.step,
            loss,
            lr,
            grad_norm,
        };
        self.step += 1;
        Ok(stats)
    }
}
