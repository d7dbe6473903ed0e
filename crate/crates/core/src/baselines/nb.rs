use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::{Error, Result};

/// Multinomial naive Bayes over non-negative (possibly fractional) counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub class_log_prior: Vec<f64>,
    /// `theta[c][f]`: smoothed conditional probability of feature `f` in class `c`.
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
}

/// Fit with Laplace/Lidstone smoothing:
/// `theta[c][f] = (count(f, c) + alpha) / (sum_f' count(f', c) + alpha * F)`.
pub fn nb_fit(
    vectors: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    n_features: usize,
    alpha: f64,
) -> Result<NbModel> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: vectors.len(),
            right: labels.len(),
        });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("smoothing alpha must be positive, got {alpha}")));
    }
    let mut counts = vec![vec![0.0; n_features]; n_classes];
    let mut docs = vec![0usize; n_classes];
    for (v, &c) in vectors.iter().zip(labels) {
        if c >= n_classes {
            return Err(Error::invalid(format!("label {c} out of range")));
        }
        docs[c] += 1;
        for (f, x) in v.iter() {
            if x < 0.0 {
                return Err(Error::NegativeFeature { feature: f, value: x });
            }
            counts[c][f] += x;
        }
    }
    if let Some(c) = docs.iter().position(|&n| n == 0) {
        return Err(Error::ClassTooSmall {
            label: c.to_string(),
            count: 0,
            required: 1,
        });
    }
    let total = vectors.len() as f64;
    let class_log_prior = docs.iter().map(|&n| (n as f64 / total).ln()).collect();
    let theta = counts
        .into_iter()
        .map(|row| {
            let denom: f64 = row.iter().sum::<f64>() + alpha * n_features as f64;
            row.into_iter().map(|x| (x + alpha) / denom).collect()
        })
        .collect();
    Ok(NbModel {
        class_log_prior,
        theta,
        alpha,
    })
}

impl NbModel {
    pub fn n_classes(&self) -> usize {
        self.theta.len()
    }

    pub fn n_features(&self) -> usize {
        self.theta.first().map_or(0, Vec::len)
    }

    /// Unnormalized `log p(c) + sum_f v_f log theta[c][f]`.
    pub fn joint_log_likelihood(&self, v: &SparseVector) -> Vec<f64> {
        self.class_log_prior
            .iter()
            .zip(&self.theta)
            .map(|(prior, row)| prior + v.iter().map(|(f, x)| x * row[f].ln()).sum::<f64>())
            .collect()
    }
}

/// Most probable class (ties go to the lower class index) and the
/// normalized log-posterior of every class.
pub fn nb_predict(model: &NbModel, v: &SparseVector) -> (usize, Vec<f64>) {
    let joint = model.joint_log_likelihood(v);
    let best = argmax(&joint);
    let lse = log_sum_exp(&joint);
    (best, joint.into_iter().map(|j| j - lse).collect())
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
