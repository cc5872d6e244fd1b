use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Graph, ParamStore, Tensor, TensorError, Var};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, p)| Tensor::zeros(p.tensor.shape()))
            .collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of every trainable parameter; `grads` is indexed like `store`.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor], lr: f64) {
        assert_eq!(grads.len(), store.len(), "one gradient per parameter");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((id, p), g) in store.iter_mut().zip(grads) {
            if !p.trainable {
                continue;
            }
            let m = self.first[id.index()].data_mut();
            let v = self.second[id.index()].data_mut();
            for (((w, &gi), mi), vi) in p.tensor.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// `lr(epoch) = base_lr * gamma^floor(epoch / step_size)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLrSchedule {
    pub base_lr: f64,
    pub step_size: usize,
    pub gamma: f64,
}

impl StepLrSchedule {
    pub fn new(base_lr: f64) -> Self {
        Self {
            base_lr,
            step_size: 10,
            gamma: 0.1,
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.base_lr * self.gamma.powi((epoch / self.step_size.max(1)) as i32)
    }
}

/// Epoch budget, batch size and learning-rate policy of one training loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// StepLR period in epochs; `None` keeps the rate constant.
    pub step_size: Option<usize>,
    pub gamma: f64,
}

impl OptimConfig {
    pub fn constant(lr: f64, epochs: usize) -> Self {
        Self {
            lr,
            epochs,
            batch_size: 256,
            step_size: None,
            gamma: 1.0,
        }
    }

    pub fn step_lr(lr: f64, epochs: usize) -> Self {
        Self {
            step_size: Some(10),
            gamma: 0.1,
            ..Self::constant(lr, epochs)
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.step_size {
            Some(step_size) => StepLrSchedule {
                base_lr: self.lr,
                step_size,
                gamma: self.gamma,
            }
            .lr(epoch),
            None => self.lr,
        }
    }

    /// Batch size clamped to `[1, n_samples]`.
    pub fn effective_batch(&self, n_samples: usize) -> usize {
        self.batch_size.min(n_samples).max(1)
    }

    pub fn validate(&self, what: &str) -> Result<(), TensorError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TensorError::Contract(format!(
                "{what}: lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 || self.step_size == Some(0) {
            return Err(TensorError::Contract(format!(
                "{what}: batch and step sizes must be positive"
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(TensorError::Contract(format!(
                "{what}: gamma {} outside (0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Mini-batch Adam over `n_samples` examples.
///
/// Every epoch visits the samples in a fresh permutation drawn from `rng`;
/// each batch averages per-sample gradients of `sample_loss` before one
/// Adam step. Returns the mean sample loss of every epoch.
pub fn fit<R, F>(
    store: &mut ParamStore,
    cfg: &OptimConfig,
    n_samples: usize,
    rng: &mut R,
    mut sample_loss: F,
) -> Result<Vec<f64>, TensorError>
where
    R: Rng,
    F: FnMut(&mut Graph, &ParamStore, usize) -> Result<Var, TensorError>,
{
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    if n_samples == 0 {
        return Err(TensorError::Contract("no training samples".into()));
    }
    let batch = cfg.effective_batch(n_samples);
    let mut adam = AdamState::new(store);
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let lr = cfg.lr_at(epoch);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut acc: Vec<Tensor> = store
                .iter()
                .map(|(_, p)| Tensor::zeros(p.tensor.shape()))
                .collect();
            for &i in chunk {
                let mut g = Graph::new();
                let loss = sample_loss(&mut g, store, i)?;
                let value = g.value(loss).item();
                if !value.is_finite() {
                    return Err(TensorError::NonFinite("training loss"));
                }
                epoch_loss += value;
                for (a, gr) in acc.iter_mut().zip(g.backward(loss)?.for_params(store)) {
                    a.add_assign(&gr);
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            acc.iter_mut()
                .for_each(|a| a.data_mut().iter_mut().for_each(|v| *v *= inv));
            adam.step(store, &acc, lr);
        }
        history.push(epoch_loss / n_samples as f64);
        log::debug!("epoch {epoch}: loss {:.6} lr {lr:e}", history[epoch]);
    }
    Ok(history)
}
