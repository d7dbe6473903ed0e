use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nb::{argmax, log_sum_exp};
use crate::features::SparseVector;
use crate::{Error, Result};

/// Softmax regression with an L2 penalty on the weights (not the bias).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    /// `weights[c][f]`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            lambda: 1e-4,
            learning_rate: 1.0,
            epochs: 200,
            batch_size: None,
            seed: 0,
        }
    }
}

/// Gradient of the mean penalized cross-entropy.
#[derive(Debug, Clone)]
pub struct LrGradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LrModel {
    pub fn zeros(n_classes: usize, n_features: usize, lambda: f64) -> Self {
        LrModel {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
            lambda,
        }
    }

    pub fn logits(&self, v: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + v.dot(w))
            .collect()
    }

    pub fn predict(&self, v: &SparseVector) -> usize {
        argmax(&self.logits(v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Mean cross-entropy over the given rows plus `(lambda / 2) ||W||^2`.
    pub fn loss(&self, vectors: &[SparseVector], labels: &[usize], rows: &[usize]) -> f64 {
        let ce: f64 = rows
            .iter()
            .map(|&i| {
                let z = self.logits(&vectors[i]);
                log_sum_exp(&z) - z[labels[i]]
            })
            .sum::<f64>()
            / rows.len() as f64;
        ce + 0.5 * self.lambda * self.frobenius_norm().powi(2)
    }

    /// Loss and exact gradient over the given rows.
    pub fn loss_and_gradient(
        &self,
        vectors: &[SparseVector],
        labels: &[usize],
        rows: &[usize],
    ) -> (f64, LrGradient) {
        let n_classes = self.bias.len();
        let mut grad = LrGradient {
            weights: self.weights.iter().map(|w| w.iter().map(|x| self.lambda * x).collect()).collect(),
            bias: vec![0.0; n_classes],
        };
        let scale = 1.0 / rows.len() as f64;
        let mut ce = 0.0;
        for &i in rows {
            let z = self.logits(&vectors[i]);
            let lse = log_sum_exp(&z);
            ce += lse - z[labels[i]];
            for c in 0..n_classes {
                let target = if c == labels[i] { 1.0 } else { 0.0 };
                let resid = ((z[c] - lse).exp() - target) * scale;
                grad.bias[c] += resid;
                for (f, x) in vectors[i].iter() {
                    grad.weights[c][f] += resid * x;
                }
            }
        }
        let loss = ce * scale + 0.5 * self.lambda * self.frobenius_norm().powi(2);
        (loss, grad)
    }
}

/// Mini-batch gradient descent on the penalized softmax objective.
pub fn lr_fit(
    vectors: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    n_features: usize,
    config: &LrConfig,
) -> Result<LrModel> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: vectors.len(),
            right: labels.len(),
        });
    }
    let mut docs = vec![0usize; n_classes];
    for &c in labels {
        if c >= n_classes {
            return Err(Error::invalid(format!("label {c} out of range")));
        }
        docs[c] += 1;
    }
    if let Some(c) = docs.iter().position(|&n| n == 0) {
        return Err(Error::ClassTooSmall {
            label: c.to_string(),
            count: 0,
            required: 1,
        });
    }

    let mut model = LrModel::zeros(n_classes, n_features, config.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let batch = config.batch_size.unwrap_or(vectors.len()).max(1);
    for epoch in 0..config.epochs {
        if config.batch_size.is_some() {
            order.shuffle(&mut rng);
        }
        for rows in order.chunks(batch) {
            let (loss, grad) = model.loss_and_gradient(vectors, labels, rows);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "logistic regression loss at epoch {epoch} (learning rate too high?)"
                )));
            }
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                for (wi, gi) in w.iter_mut().zip(g) {
                    *wi -= config.learning_rate * gi;
                }
            }
            for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                *b -= config.learning_rate * g;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> (Vec<SparseVector>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = i % 2;
            // class signal on feature y, noise on features 2..5
            let mut pairs = vec![(y as u32, 1.0 + rng.gen::<f64>())];
            for f in 2..5 {
                pairs.push((f, rng.gen::<f64>()));
            }
            xs.push(SparseVector::from_pairs(pairs));
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn separable_reaches_full_accuracy() {
        let (xs, ys) = separable(40, 1);
        let cfg = LrConfig { epochs: 200, lambda: 0.0, ..Default::default() };
        let m = lr_fit(&xs, &ys, 2, 5, &cfg).unwrap();
        let correct = xs.iter().zip(&ys).filter(|(x, &y)| m.predict(x) == y).count();
        assert_eq!(correct, xs.len());
    }

    #[test]
    fn huge_penalty_shrinks_weights() {
        let (xs, ys) = separable(20, 2);
        let cfg = LrConfig { lambda: 1e6, learning_rate: 1e-7, epochs: 50, ..Default::default() };
        let m = lr_fit(&xs, &ys, 2, 5, &cfg).unwrap();
        assert!(m.frobenius_norm() < 1e-2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (xs, ys) = separable(12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = LrModel::zeros(3, 5, 0.1);
        for w in m.weights.iter_mut().flatten() {
            *w = rng.gen_range(-1.0..1.0);
        }
        for b in &mut m.bias {
            *b = rng.gen_range(-1.0..1.0);
        }
        let ys: Vec<usize> = ys.iter().enumerate().map(|(i, &y)| if i % 5 == 0 { 2 } else { y }).collect();
        let rows: Vec<usize> = (0..xs.len()).collect();
        let (_, g) = m.loss_and_gradient(&xs, &ys, &rows);
        let eps = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for c in 0..3 {
            for f in 0..5 {
                let mut p = m.clone();
                p.weights[c][f] += eps;
                let mut q = m.clone();
                q.weights[c][f] -= eps;
                let num = (p.loss(&xs, &ys, &rows) - q.loss(&xs, &ys, &rows)) / (2.0 * eps);
                assert!(rel(g.weights[c][f], num) < 1e-5, "w[{c}][{f}]");
            }
            let mut p = m.clone();
            p.bias[c] += eps;
            let mut q = m.clone();
            q.bias[c] -= eps;
            let num = (p.loss(&xs, &ys, &rows) - q.loss(&xs, &ys, &rows)) / (2.0 * eps);
            assert!(rel(g.bias[c], num) < 1e-5, "b[{c}]");
        }
    }

    #[test]
    fn full_batch_loss_non_increasing() {
        let (xs, ys) = separable(30, 4);
        let rows: Vec<usize> = (0..xs.len()).collect();
        let mut last = f64::INFINITY;
        for epochs in 0..25 {
            let cfg = LrConfig { epochs, learning_rate: 0.5, lambda: 1e-3, ..Default::default() };
            let m = lr_fit(&xs, &ys, 2, 5, &cfg).unwrap();
            let loss = m.loss(&xs, &ys, &rows);
            assert!(loss <= last + 1e-12);
            last = loss;
        }
    }

    #[test]
    fn diverging_learning_rate_errors() {
        let (xs, ys) = separable(10, 5);
        let xs: Vec<SparseVector> = xs
            .iter()
            .map(|v| SparseVector::from_pairs(v.iter().map(|(f, x)| (f as u32, x * 1e150))))
            .collect();
        let cfg = LrConfig { learning_rate: 1e150, epochs: 5, ..Default::default() };
        assert!(matches!(lr_fit(&xs, &ys, 2, 5, &cfg), Err(Error::NonFinite(_))));
    }
}
