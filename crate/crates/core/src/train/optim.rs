use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::{Gradients, ModelParams, Task};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_peak: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub task: Task,
    /// Coverage threshold handed to the sampler each epoch.
    #[serde(default = "default_thre")]
    pub thre: usize,
}

fn default_thre() -> usize {
    1
}

impl TrainConfig {
    /// Schedule sized for `num_train` graphs: decay ends at the last step and
    /// the first tenth of the steps warm up.
    pub fn for_dataset(
        epochs: usize,
        batch_size: usize,
        lr_peak: f64,
        num_train: usize,
        seed: u64,
        task: Task,
    ) -> Self {
        let per_epoch = num_train.div_ceil(batch_size.max(1)).max(1);
        let total_steps = epochs * per_epoch;
        TrainConfig {
            epochs,
            batch_size,
            lr_peak,
            warmup_steps: total_steps / 10,
            total_steps,
            seed,
            task,
            thre: 1,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lr_peak > 0.0) || !self.lr_peak.is_finite() {
            return Err(Error::Config(format!(
                "lr_peak must be positive, got {}",
                self.lr_peak
            )));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::Config(format!(
                "warmup_steps ({}) exceeds total_steps ({})",
                self.warmup_steps, self.total_steps
            )));
        }
        if self.batch_size == 0 || self.thre == 0 {
            return Err(Error::Config("batch_size and thre must be positive".into()));
        }
        Ok(())
    }
}

/// Linear warm-up to `lr_peak`, then linear decay reaching 0 at `total_steps`.
pub fn learning_rate(step: usize, cfg: &TrainConfig) -> f64 {
    if step <= cfg.warmup_steps {
        if cfg.warmup_steps == 0 {
            cfg.lr_peak
        } else {
            cfg.lr_peak * step as f64 / cfg.warmup_steps as f64
        }
    } else if step >= cfg.total_steps {
        0.0
    } else {
        cfg.lr_peak * (cfg.total_steps - step) as f64 / (cfg.total_steps - cfg.warmup_steps) as f64
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One Adam update at 1-based `step`. The frozen substructure table is skipped.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    step: usize,
    cfg: &TrainConfig,
) {
    assert!(step >= 1, "adam steps are 1-based");
    let lr = learning_rate(step, cfg);
    let c1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(step as i32);
    let p_all = params.tensors_mut();
    let g_all = grads.tensors();
    let m_all = state.m.tensors_mut();
    let v_all = state.v.tensors_mut();
    for ((((name, p), (_, g)), (_, m)), (_, v)) in
        p_all.into_iter().zip(g_all).zip(m_all).zip(v_all)
    {
        if name == "embed.sub.fixed" {
            continue;
        }
        ndarray::Zip::from(p)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
    }
}
