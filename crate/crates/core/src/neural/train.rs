use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{init_model, prepare_ids, DropoutRates, GradientBuffer, MlpMaxPool, Mode};
use super::optim::{optimizer_step, AdamConfig, AdamState};
use crate::adadrop::{self, DropoutSchedule, GradientNormStats};
use crate::corpus::{LabeledCorpus, SplitManifest, Vocabulary, DEFAULT_MAX_VOCAB};
use crate::{Error, Result};

/// Which regularizer shapes training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    None,
    /// The training documents were anonymized beforehand.
    Anon,
    /// Adaptive word dropout.
    AdaDrop,
}

impl Regularizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Anon => "anon",
            Regularizer::AdaDrop => "adadrop",
        }
    }
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Regularizer::None),
            "anon" => Ok(Regularizer::Anon),
            "adadrop" => Ok(Regularizer::AdaDrop),
            _ => Err(Error::invalid(format!("unknown regularizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: AdamConfig,
    pub dropout: DropoutRates,
    pub max_len: usize,
    pub max_vocab: usize,
    pub seed: u64,
    /// Threshold `t` of adaptive dropout.
    pub adadrop_threshold: f64,
    pub adadrop_p_max: f64,
    /// Recompute the dropout schedule after every step instead of once
    /// per epoch.
    pub schedule_every_step: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embedding_dim: 300,
            hidden_dim: 300,
            batch_size: 150,
            epochs: 20,
            optimizer: AdamConfig::default(),
            dropout: DropoutRates::default(),
            max_len: 400,
            max_vocab: DEFAULT_MAX_VOCAB,
            seed: 0,
            adadrop_threshold: adadrop::DEFAULT_THRESHOLD,
            adadrop_p_max: adadrop::DEFAULT_P_MAX,
            schedule_every_step: false,
        }
    }
}

impl TrainConfig {
    /// Small model and batches that train in seconds on a laptop.
    pub fn desk_scale() -> Self {
        TrainConfig {
            embedding_dim: 50,
            hidden_dim: 128,
            batch_size: 32,
            epochs: 20,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dropout;
        for (name, r) in [("input", d.input), ("output", d.output), ("variational", d.variational)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::invalid(format!("{name} dropout must lie in [0, 1), got {r}")));
            }
        }
        if self.batch_size == 0 || self.max_len == 0 {
            return Err(Error::invalid("batch_size and max_len must be at least 1"));
        }
        if !(self.optimizer.clip_norm > 0.0) || !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::invalid("clip_norm and learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub loss: f64,
}

/// Passed to a training observer after every backward pass, before the
/// gradient is clipped.
pub struct StepEvent<'a> {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
    pub grads: &'a GradientBuffer,
    pub stats: &'a GradientNormStats,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpMaxPool,
    pub vocab: Vocabulary,
    pub labels: Vec<String>,
    pub metrics: Vec<EpochMetrics>,
    /// Gradient-norm statistics; kept for every regularizer.
    pub stats: GradientNormStats,
    /// The schedule in force at the end of training (adaptive dropout only).
    pub schedule: Option<DropoutSchedule>,
}

/// Stream used for evaluation-time randomness (ANON vectors only).
const EVAL_STREAM: u64 = 1;

/// Random stream for evaluation-time `ANON` vectors.
pub fn eval_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM);
    rng
}

/// Fraction of `docs` whose prediction matches `labels`.
pub fn accuracy(model: &MlpMaxPool, docs: &[Vec<u32>], labels: &[usize], seed: u64) -> Result<f64> {
    if docs.is_empty() {
        return Ok(0.0);
    }
    let mut rng = eval_rng(seed);
    let mut correct = 0;
    for (ids, &y) in docs.iter().zip(labels) {
        if model.predict(ids, &mut rng)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / docs.len() as f64)
}

pub fn train(
    corpus: &LabeledCorpus,
    manifest: &SplitManifest,
    config: &TrainConfig,
    regularizer: Regularizer,
) -> Result<TrainOutcome> {
    train_with_observer(corpus, manifest, config, regularizer, |_| {})
}

/// Train on the manifest's train side, reporting accuracy on both sides
/// after every epoch. `corpus` is used as given: for keyword anonymization
/// pass the anonymized corpus.
pub fn train_with_observer<F>(
    corpus: &LabeledCorpus,
    manifest: &SplitManifest,
    config: &TrainConfig,
    regularizer: Regularizer,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&StepEvent<'_>),
{
    config.validate()?;
    let (train_pos, test_pos) = corpus.split_positions(manifest)?;
    if train_pos.is_empty() {
        return Err(Error::invalid("the train split is empty"));
    }
    let vocab = Vocabulary::build(
        train_pos.iter().map(|&i| corpus.documents()[i].tokens.as_slice()),
        config.max_vocab,
    )?;
    let encode = |pos: &[usize]| -> (Vec<Vec<u32>>, Vec<usize>) {
        pos.iter()
            .map(|&i| (prepare_ids(&vocab, &corpus.documents()[i].tokens, config.max_len), corpus.label_of(i)))
            .unzip()
    };
    let (train_ids, train_y) = encode(&train_pos);
    let (test_ids, test_y) = encode(&test_pos);

    let mut model = init_model(
        vocab.len(),
        config.embedding_dim,
        config.hidden_dim,
        corpus.labels().len(),
        config.seed,
    )?;
    let mut adam = AdamState::new(&model);
    let mut stats = GradientNormStats::new(vocab.len());
    let adaptive = regularizer == Regularizer::AdaDrop;
    let schedule_now = |stats: &GradientNormStats| -> Result<DropoutSchedule> {
        if stats.optim_steps == 0 {
            Ok(DropoutSchedule::inactive(vocab.len(), config.adadrop_threshold, config.adadrop_p_max))
        } else {
            adadrop::dropout_probability(stats, config.adadrop_threshold, config.adadrop_p_max)
        }
    };
    let mut schedule = schedule_now(&stats)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_ids.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        if adaptive {
            schedule = schedule_now(&stats)?;
        }
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for rows in order.chunks(config.batch_size) {
            if adaptive && config.schedule_every_step {
                schedule = schedule_now(&stats)?;
            }
            let batch: Vec<Vec<u32>> = rows
                .iter()
                .map(|&r| {
                    if adaptive {
                        adadrop::apply_word_dropout(&train_ids[r], &schedule, Mode::Train, &mut rng)
                    } else {
                        train_ids[r].clone()
                    }
                })
                .collect();
            let refs: Vec<&[u32]> = batch.iter().map(Vec::as_slice).collect();
            let labels: Vec<usize> = rows.iter().map(|&r| train_y[r]).collect();
            let (loss, mut grads) =
                model.loss_and_backward(&refs, &labels, Mode::Train, &config.dropout, &mut rng)?;
            stats.accumulate(&grads)?;
            observer(&StepEvent {
                epoch,
                step: stats.optim_steps,
                loss,
                grads: &grads,
                stats: &stats,
            });
            optimizer_step(&mut model, &mut grads, &config.optimizer, &mut adam)?;
            loss_sum += loss;
            batches += 1;
        }
        let m = EpochMetrics {
            epoch,
            train_acc: accuracy(&model, &train_ids, &train_y, config.seed)?,
            test_acc: accuracy(&model, &test_ids, &test_y, config.seed)?,
            loss: loss_sum / batches as f64,
        };
        info!(
            "epoch {epoch}: loss {:.4}, train acc {:.4}, test acc {:.4}",
            m.loss, m.train_acc, m.test_acc
        );
        metrics.push(m);
    }
    if adaptive {
        schedule = schedule_now(&stats)?;
    }
    Ok(TrainOutcome {
        model,
        vocab,
        labels: corpus.labels().to_vec(),
        metrics,
        stats,
        schedule: adaptive.then_some(schedule),
    })
}

/// Write per-epoch metrics as a JSON array.
pub fn write_metrics(path: impl AsRef<Path>, metrics: &[EpochMetrics]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(metrics)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
