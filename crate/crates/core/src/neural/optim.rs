use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::model::{GradientBuffer, MlpMaxPool};
use crate::corpus::Vocabulary;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }
}

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    m_embedding: Array2<f64>,
    v_embedding: Array2<f64>,
    m_w1: Array2<f64>,
    v_w1: Array2<f64>,
    m_b1: Array1<f64>,
    v_b1: Array1<f64>,
    m_w2: Array2<f64>,
    v_w2: Array2<f64>,
    m_b2: Array1<f64>,
    v_b2: Array1<f64>,
}

impl AdamState {
    pub fn new(model: &MlpMaxPool) -> Self {
        AdamState {
            step: 0,
            m_embedding: Array2::zeros(model.embedding.raw_dim()),
            v_embedding: Array2::zeros(model.embedding.raw_dim()),
            m_w1: Array2::zeros(model.w1.raw_dim()),
            v_w1: Array2::zeros(model.w1.raw_dim()),
            m_b1: Array1::zeros(model.b1.raw_dim()),
            v_b1: Array1::zeros(model.b1.raw_dim()),
            m_w2: Array2::zeros(model.w2.raw_dim()),
            v_w2: Array2::zeros(model.w2.raw_dim()),
            m_b2: Array1::zeros(model.b2.raw_dim()),
            v_b2: Array1::zeros(model.b2.raw_dim()),
        }
    }
}

/// Rescale `grads` so that their global norm is at most `max_norm`.
/// Returns the norm before rescaling.
pub fn clip_global_norm(grads: &mut GradientBuffer, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

struct Moments {
    b1: f64,
    b2: f64,
    c1: f64,
    c2: f64,
    lr: f64,
    eps: f64,
}

impl Moments {
    #[inline]
    fn update(&self, p: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        *m = self.b1 * *m + (1.0 - self.b1) * g;
        *v = self.b2 * *v + (1.0 - self.b2) * g * g;
        let m_hat = *m / self.c1;
        let v_hat = *v / self.c2;
        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}

/// Clip, then take one Adam step on every parameter.
///
/// Embedding rows absent from `grads` are treated as zero gradients, so
/// their moments still decay. The DROP row is never touched.
pub fn optimizer_step(
    model: &mut MlpMaxPool,
    grads: &mut GradientBuffer,
    config: &AdamConfig,
    state: &mut AdamState,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    if !(config.clip_norm > 0.0) {
        return Err(Error::invalid("clip_norm must be positive"));
    }
    clip_global_norm(grads, config.clip_norm);
    state.step += 1;
    let t = state.step as i32;
    let mo = Moments {
        b1: config.beta1,
        b2: config.beta2,
        c1: 1.0 - config.beta1.powi(t),
        c2: 1.0 - config.beta2.powi(t),
        lr: config.learning_rate,
        eps: config.eps,
    };

    Zip::from(&mut model.w1)
        .and(&mut state.m_w1)
        .and(&mut state.v_w1)
        .and(&grads.w1)
        .for_each(|p, m, v, &g| mo.update(p, m, v, g));
    Zip::from(&mut model.b1)
        .and(&mut state.m_b1)
        .and(&mut state.v_b1)
        .and(&grads.b1)
        .for_each(|p, m, v, &g| mo.update(p, m, v, g));
    Zip::from(&mut model.w2)
        .and(&mut state.m_w2)
        .and(&mut state.v_w2)
        .and(&grads.w2)
        .for_each(|p, m, v, &g| mo.update(p, m, v, g));
    Zip::from(&mut model.b2)
        .and(&mut state.m_b2)
        .and(&mut state.v_b2)
        .and(&grads.b2)
        .for_each(|p, m, v, &g| mo.update(p, m, v, g));

    let dim = model.dim();
    let zero = Array1::<f64>::zeros(dim);
    for r in 0..model.vocab_size() {
        if r == Vocabulary::DROP as usize {
            continue;
        }
        let g = grads.embedding.get(&(r as u32)).unwrap_or(&zero);
        Zip::from(model.embedding.row_mut(r))
            .and(state.m_embedding.row_mut(r))
            .and(state.v_embedding.row_mut(r))
            .and(g)
            .for_each(|p, m, v, &g| mo.update(p, m, v, g));
    }
    Ok(())
}
