//! Bag-of-n-grams baselines: multinomial naive Bayes and softmax regression.

mod lr;
mod nb;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use lr::{lr_fit, LrConfig, LrGradient, LrModel};
pub use nb::{nb_fit, nb_predict, NbModel};
pub(crate) use nb::{argmax, log_sum_exp};

use crate::{Error, Result};

/// Default smoothing for naive Bayes.
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy<T: Ord> {
    pub accuracy: f64,
    /// Fraction correct among documents of each gold class.
    pub per_class: BTreeMap<T, f64>,
}

/// Overall and per-gold-class accuracy.
pub fn evaluate_accuracy<T: Ord + Clone>(predictions: &[T], gold: &[T]) -> Result<Accuracy<T>> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::invalid("cannot evaluate accuracy of zero predictions"));
    }
    let mut tally: BTreeMap<T, (usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for (p, g) in predictions.iter().zip(gold) {
        let e = tally.entry(g.clone()).or_default();
        e.1 += 1;
        if p == g {
            e.0 += 1;
            correct += 1;
        }
    }
    Ok(Accuracy {
        accuracy: correct as f64 / gold.len() as f64,
        per_class: tally
            .into_iter()
            .map(|(k, (c, n))| (k, c as f64 / n as f64))
            .collect(),
    })
}
