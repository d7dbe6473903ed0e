use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anonymize::sample_anon_embedding;
use crate::baselines::{argmax, log_sum_exp};
use crate::corpus::Vocabulary;
use crate::{adadrop, Error, Result};

/// Half-width of the uniform embedding initialization.
pub const EMBEDDING_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Dropout rates used in train mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutRates {
    /// Per-element dropout on every embedded token.
    pub input: f64,
    /// Dropout on the pooled vector.
    pub output: f64,
    /// Per-sequence shared mask on the embeddings; 0 disables it.
    pub variational: f64,
}

impl DropoutRates {
    pub const NONE: DropoutRates = DropoutRates {
        input: 0.0,
        output: 0.0,
        variational: 0.0,
    };
}

impl Default for DropoutRates {
    fn default() -> Self {
        DropoutRates {
            input: 0.5,
            output: 0.5,
            variational: 0.0,
        }
    }
}

/// Embeddings, a per-token rectifier layer, max pooling over time and a
/// linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpMaxPool {
    /// `V x D`
    pub embedding: Array2<f64>,
    /// `H x D`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `C x H`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-s, s);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

pub fn init_model(
    vocab_size: usize,
    dim: usize,
    hidden: usize,
    classes: usize,
    seed: u64,
) -> Result<MlpMaxPool> {
    if vocab_size <= Vocabulary::DROP as usize || dim == 0 || hidden == 0 || classes == 0 {
        return Err(Error::invalid(format!(
            "model dimensions must be positive and the vocabulary must hold the special tokens \
             (V={vocab_size}, D={dim}, H={hidden}, C={classes})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = Uniform::new_inclusive(-EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE);
    let mut embedding = Array2::from_shape_simple_fn((vocab_size, dim), || e.sample(&mut rng));
    embedding.row_mut(Vocabulary::DROP as usize).fill(0.0);
    let w1 = glorot(hidden, dim, &mut rng);
    let w2 = glorot(classes, hidden, &mut rng);
    Ok(MlpMaxPool {
        embedding,
        w1,
        b1: Array1::zeros(hidden),
        w2,
        b2: Array1::zeros(classes),
    })
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub ids: Vec<u32>,
    /// Inputs after dropout, `T x D`.
    pub inputs: Array2<f64>,
    /// Combined dropout multipliers applied to the inputs, `T x D`.
    pub input_scale: Option<Array2<f64>>,
    /// Hidden pre-activations, `T x H`.
    pub pre_activation: Array2<f64>,
    /// Timestep chosen by the max pool for every hidden unit.
    pub argmax: Vec<usize>,
    /// Pooled vector before output dropout.
    pub pooled: Array1<f64>,
    pub output_mask: Option<Array1<f64>>,
}

fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Array1<f64> {
    let keep = 1.0 - rate;
    Array1::from_shape_simple_fn(n, || if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

impl MlpMaxPool {
    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn classes(&self) -> usize {
        self.w2.nrows()
    }

    /// Logits for one token sequence.
    ///
    /// Random draws happen in a fixed order (variational mask, then per
    /// token an ANON vector and an input mask, then the output mask), so the
    /// same `rng` state reproduces the same pass.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        ids: &[u32],
        mode: Mode,
        rates: &DropoutRates,
        rng: &mut R,
    ) -> Result<(Array1<f64>, ForwardCache)> {
        if ids.is_empty() {
            return Err(Error::invalid("cannot run the model on an empty token sequence"));
        }
        let (t_len, d) = (ids.len(), self.dim());
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.vocab_size()) {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of size {}",
                self.vocab_size()
            )));
        }
        let train = mode == Mode::Train;
        let variational = adadrop::variational_mask(d, rates.variational, mode, rng);
        let mut inputs = Array2::zeros((t_len, d));
        let mut scale = (train && (rates.input > 0.0 || variational.is_some())).then(|| Array2::ones((t_len, d)));
        for (t, &id) in ids.iter().enumerate() {
            let mut row = inputs.row_mut(t);
            match id {
                Vocabulary::DROP => {}
                Vocabulary::ANON => row.assign(&Array1::from(sample_anon_embedding(d, rng))),
                _ => row.assign(&self.embedding.row(id as usize)),
            }
            if let Some(scale) = scale.as_mut() {
                let mut s = scale.row_mut(t);
                if let Some(v) = &variational {
                    s.assign(&ArrayView1::from(v.as_slice()));
                }
                if rates.input > 0.0 {
                    s *= &dropout_mask(d, rates.input, rng);
                }
                row *= &s;
            }
        }

        let pre_activation = inputs.dot(&self.w1.t()) + &self.b1;
        let h = self.hidden();
        let mut argmax = vec![0usize; h];
        let mut pooled = Array1::zeros(h);
        for j in 0..h {
            let col = pre_activation.column(j);
            let mut best = 0;
            for t in 1..t_len {
                // strict comparison keeps the earliest timestep on ties
                if col[t].max(0.0) > col[best].max(0.0) {
                    best = t;
                }
            }
            argmax[j] = best;
            pooled[j] = col[best].max(0.0);
        }
        let output_mask = (train && rates.output > 0.0).then(|| dropout_mask(h, rates.output, rng));
        let dropped = match &output_mask {
            Some(m) => &pooled * m,
            None => pooled.clone(),
        };
        let logits = self.w2.dot(&dropped) + &self.b2;
        Ok((
            logits,
            ForwardCache {
                ids: ids.to_vec(),
                inputs,
                input_scale: scale,
                pre_activation,
                argmax,
                pooled,
                output_mask,
            },
        ))
    }

    /// Add the gradient of a loss with logit gradient `dlogits` into `grads`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: ArrayView1<f64>, grads: &mut GradientBuffer) {
        let dropped = match &cache.output_mask {
            Some(m) => &cache.pooled * m,
            None => cache.pooled.clone(),
        };
        for (c, &g) in dlogits.iter().enumerate() {
            grads.w2.row_mut(c).scaled_add(g, &dropped);
        }
        grads.b2 += &dlogits;
        let mut dpooled = self.w2.t().dot(&dlogits);
        if let Some(m) = &cache.output_mask {
            dpooled *= m;
        }

        let mut dinputs = Array2::<f64>::zeros(cache.inputs.raw_dim());
        for (j, &t) in cache.argmax.iter().enumerate() {
            // the rectifier passes gradient only where it is active
            if cache.pre_activation[[t, j]] > 0.0 {
                let dz = dpooled[j];
                grads.w1.row_mut(j).scaled_add(dz, &cache.inputs.row(t));
                grads.b1[j] += dz;
                dinputs.row_mut(t).scaled_add(dz, &self.w1.row(j));
            }
        }
        if let Some(scale) = &cache.input_scale {
            dinputs *= scale;
        }
        for (t, &id) in cache.ids.iter().enumerate() {
            if id == Vocabulary::DROP || id == Vocabulary::ANON {
                continue;
            }
            grads
                .embedding
                .entry(id)
                .or_insert_with(|| Array1::zeros(self.dim()))
                .scaled_add(1.0, &dinputs.row(t));
        }
    }

    /// Mean cross-entropy over a batch and its exact gradient.
    pub fn loss_and_backward<R: Rng + ?Sized>(
        &self,
        batch: &[&[u32]],
        labels: &[usize],
        mode: Mode,
        rates: &DropoutRates,
        rng: &mut R,
    ) -> Result<(f64, GradientBuffer)> {
        if batch.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: batch.len(),
                right: labels.len(),
            });
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut grads = GradientBuffer::zeros(self.dim(), self.hidden(), self.classes());
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (ids, &y) in batch.iter().zip(labels) {
            if y >= self.classes() {
                return Err(Error::invalid(format!("label {y} out of range")));
            }
            let (logits, cache) = self.forward(ids, mode, rates, rng)?;
            let lse = log_sum_exp(logits.as_slice().expect("contiguous"));
            loss += lse - logits[y];
            let mut dlogits = logits.mapv(|z| (z - lse).exp() * scale);
            dlogits[y] -= scale;
            self.backward(&cache, dlogits.view(), &mut grads);
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::NonFinite("cross-entropy loss".into()));
        }
        Ok((loss, grads))
    }

    /// Mean cross-entropy without gradients.
    pub fn loss<R: Rng + ?Sized>(
        &self,
        batch: &[&[u32]],
        labels: &[usize],
        mode: Mode,
        rates: &DropoutRates,
        rng: &mut R,
    ) -> Result<f64> {
        let mut loss = 0.0;
        for (ids, &y) in batch.iter().zip(labels) {
            let (logits, _) = self.forward(ids, mode, rates, rng)?;
            loss += log_sum_exp(logits.as_slice().expect("contiguous")) - logits[y];
        }
        Ok(loss / batch.len() as f64)
    }

    /// Most likely class in eval mode.
    pub fn predict<R: Rng + ?Sized>(&self, ids: &[u32], rng: &mut R) -> Result<usize> {
        let (logits, _) = self.forward(ids, Mode::Eval, &DropoutRates::NONE, rng)?;
        Ok(argmax(logits.as_slice().expect("contiguous")))
    }

    pub fn is_finite(&self) -> bool {
        [&self.embedding, &self.w1, &self.w2]
            .iter()
            .all(|a| a.iter().all(|x| x.is_finite()))
            && self.b1.iter().chain(&self.b2).all(|x| x.is_finite())
    }
}

/// Gradients of every parameter; the embedding part only holds rows of
/// tokens that occurred in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub embedding: BTreeMap<u32, Array1<f64>>,
}

impl GradientBuffer {
    pub fn zeros(dim: usize, hidden: usize, classes: usize) -> Self {
        GradientBuffer {
            w1: Array2::zeros((hidden, dim)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((classes, hidden)),
            b2: Array1::zeros(classes),
            embedding: BTreeMap::new(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        let sq = |xs: &mut dyn Iterator<Item = &f64>| xs.map(|x| x * x).sum::<f64>();
        (sq(&mut self.w1.iter())
            + sq(&mut self.b1.iter())
            + sq(&mut self.w2.iter())
            + sq(&mut self.b2.iter())
            + self.embedding.values().map(|r| r.dot(r)).sum::<f64>())
        .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.w1 *= factor;
        self.b1 *= factor;
        self.w2 *= factor;
        self.b2 *= factor;
        for r in self.embedding.values_mut() {
            *r *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.global_norm().is_finite()
    }
}

/// Empty sequences become a single UNK; long ones are cut to `max_len`.
pub fn prepare_ids(vocab: &Vocabulary, tokens: &[String], max_len: usize) -> Vec<u32> {
    let mut ids = vocab.encode(&tokens[..tokens.len().min(max_len)]);
    if ids.is_empty() {
        ids.push(Vocabulary::UNK);
    }
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    fn model() -> MlpMaxPool {
        init_model(10, 4, 6, 3, 7).unwrap()
    }

    #[test]
    fn init_contract() {
        let m = model();
        assert!(m.embedding.row(Vocabulary::DROP as usize).iter().all(|&x| x == 0.0));
        assert!(m.embedding.iter().all(|x| x.abs() <= EMBEDDING_INIT_RANGE));
        let s = (6.0f64 / 10.0).sqrt();
        assert!(m.w1.iter().all(|x| x.abs() <= s));
        assert!(m.b1.iter().chain(&m.b2).all(|&x| x == 0.0));
        assert_eq!(m, model());
        assert_ne!(m, init_model(10, 4, 6, 3, 8).unwrap());
        assert!(init_model(2, 4, 6, 3, 0).is_err());
    }

    #[test]
    fn single_token_pooling_is_identity() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, cache) = m.forward(&[5], Mode::Eval, &DropoutRates::NONE, &mut rng).unwrap();
        let h = cache.pre_activation.row(0).mapv(|z| z.max(0.0));
        assert_eq!(cache.pooled, h);
    }

    #[test]
    fn repeated_token_changes_nothing() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _) = m.forward(&[5, 6], Mode::Eval, &DropoutRates::NONE, &mut rng).unwrap();
        let (b, _) = m.forward(&[5, 5, 6], Mode::Eval, &DropoutRates::NONE, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_is_deterministic() {
        let m = model();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = m.forward(&[3, 4, 9], Mode::Eval, &DropoutRates::default(), &mut r1).unwrap().0;
        let b = m.forward(&[3, 4, 9], Mode::Eval, &DropoutRates::default(), &mut r2).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_logits_give_ln_c() {
        let mut m = model();
        m.w2.fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ids: &[u32] = &[3, 4];
        let (loss, _) = m
            .loss_and_backward(&[ids], &[1], Mode::Eval, &DropoutRates::NONE, &mut rng)
            .unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sparse_rows_and_specials() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ids: &[u32] = &[3, Vocabulary::DROP, Vocabulary::ANON, 7];
        let (_, g) = m
            .loss_and_backward(&[ids], &[0], Mode::Train, &DropoutRates::default(), &mut rng)
            .unwrap();
        let rows: Vec<u32> = g.embedding.keys().copied().collect();
        assert_eq!(rows, [3, 7]);
    }

    #[test]
    fn empty_and_out_of_range() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(m.forward(&[], Mode::Eval, &DropoutRates::NONE, &mut rng).is_err());
        assert!(m.forward(&[10], Mode::Eval, &DropoutRates::NONE, &mut rng).is_err());
    }

    #[test]
    fn non_argmax_timesteps_do_not_matter() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ids = [3u32, 4, 5, 6, 8];
        let (logits, cache) = m.forward(&ids, Mode::Eval, &DropoutRates::NONE, &mut rng).unwrap();
        // rebuild the pooled vector after zeroing every non-argmax hidden value
        let mut h = cache.pre_activation.mapv(|z| z.max(0.0));
        for (j, &t) in cache.argmax.iter().enumerate() {
            for s in 0..ids.len() {
                if s != t {
                    h[[s, j]] = 0.0;
                }
            }
        }
        let pooled = h.map_axis(Axis(0), |c| c.fold(0.0f64, |a, &b| a.max(b)));
        let again = m.w2.dot(&pooled) + &m.b2;
        assert_eq!(logits, again);
    }

    #[test]
    fn prepare_handles_edges() {
        let v = Vocabulary::build([["a".to_string(), "b".to_string()].as_slice()], 10).unwrap();
        assert_eq!(prepare_ids(&v, &[], 5), [Vocabulary::UNK]);
        let long: Vec<String> = vec!["a".into(); 9];
        assert_eq!(prepare_ids(&v, &long, 4).len(), 4);
    }
}
