use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adadrop::GradientNormStats;
use crate::anonymize::{anonymize_with_phrases, identify_training_keywords};
use crate::baselines::{lr_fit, nb_fit, nb_predict, LrConfig, LrModel, NbModel, DEFAULT_ALPHA};
use crate::corpus::{Document, LabeledCorpus, SplitManifest};
use crate::features::{FeatureConfig, TfIdfModel};
use crate::lexicon::K_SMALL_CORPUS;
use crate::neural::{prepare_ids, train, Checkpoint, EpochMetrics, Regularizer, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Lr,
    MlpMax,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Nb, ModelKind::Lr, ModelKind::MlpMax];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Lr => "lr",
            ModelKind::MlpMax => "mlpmax",
        }
    }

    /// Adaptive dropout needs an embedding layer.
    pub fn supports(self, regularizer: Regularizer) -> bool {
        self == ModelKind::MlpMax || regularizer != Regularizer::AdaDrop
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nb" => Ok(ModelKind::Nb),
            "lr" => Ok(ModelKind::Lr),
            "mlpmax" => Ok(ModelKind::MlpMax),
            _ => Err(Error::invalid(format!("unknown model {s:?} (expected nb, lr or mlpmax)"))),
        }
    }
}

/// Hyperparameters of every model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub features: FeatureConfig,
    pub nb_alpha: f64,
    pub lr: LrConfig,
    pub neural: TrainConfig,
    /// Lexicon size used to find keywords for anonymization.
    pub anon_k: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            features: FeatureConfig::default(),
            nb_alpha: DEFAULT_ALPHA,
            lr: LrConfig::default(),
            neural: TrainConfig::desk_scale(),
            anon_k: K_SMALL_CORPUS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Nb {
        labels: Vec<String>,
        tfidf: TfIdfModel,
        nb: NbModel,
    },
    Lr {
        labels: Vec<String>,
        tfidf: TfIdfModel,
        lr: LrModel,
    },
    MlpMax {
        checkpoint: Checkpoint,
    },
}

/// A trained model with the settings that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model: ModelKind,
    pub regularizer: Regularizer,
    pub seed: u64,
    pub settings: ModelSettings,
    pub trained: TrainedModel,
    /// Per-epoch metrics of neural training.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epochs: Vec<EpochMetrics>,
    /// Embedding-gradient statistics of neural training; not saved.
    #[serde(skip)]
    pub grad_stats: Option<GradientNormStats>,
}

impl ModelArtifact {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn labels(&self) -> &[String] {
        match &self.trained {
            TrainedModel::Nb { labels, .. } | TrainedModel::Lr { labels, .. } => labels,
            TrainedModel::MlpMax { checkpoint } => &checkpoint.labels,
        }
    }

    /// Predicted label of each document.
    pub fn predict(&self, docs: &[&Document]) -> Result<Vec<String>> {
        let labels = self.labels();
        let idx: Vec<usize> = match &self.trained {
            TrainedModel::Nb { tfidf, nb, .. } => docs
                .iter()
                .map(|d| nb_predict(nb, &tfidf.transform(&d.tokens)).0)
                .collect(),
            TrainedModel::Lr { tfidf, lr, .. } => docs
                .iter()
                .map(|d| lr.predict(&tfidf.transform(&d.tokens)))
                .collect(),
            TrainedModel::MlpMax { checkpoint } => {
                let ids: Vec<Vec<u32>> = docs
                    .iter()
                    .map(|d| prepare_ids(&checkpoint.vocab, &d.tokens, checkpoint.config.max_len))
                    .collect();
                let mut rng = crate::neural::eval_rng(checkpoint.config.seed);
                ids.iter()
                    .map(|x| checkpoint.model.predict(x, &mut rng))
                    .collect::<Result<_>>()?
            }
        };
        Ok(idx.into_iter().map(|i| labels[i].clone()).collect())
    }
}

/// The corpus a regularizer trains on: with anonymization, the train-side
/// documents have their keywords (found on the train side alone) masked.
pub fn training_corpus(
    corpus: &LabeledCorpus,
    manifest: &SplitManifest,
    regularizer: Regularizer,
    settings: &ModelSettings,
    seed: u64,
) -> Result<LabeledCorpus> {
    if regularizer != Regularizer::Anon {
        return Ok(corpus.clone());
    }
    let (train_pos, _) = corpus.split_positions(manifest)?;
    let train_side = corpus.subset(&train_pos)?;
    let keywords = identify_training_keywords(&train_side, settings.anon_k, &settings.features)?;
    let train_ids: HashSet<&str> = manifest.train_ids.iter().map(String::as_str).collect();
    let anon = anonymize_with_phrases(corpus, &keywords.all_phrases(), seed, |d| {
        train_ids.contains(d.id.as_str())
    })?;
    Ok(anon.corpus)
}

/// Train one model on the manifest's train side.
pub fn fit_model(
    kind: ModelKind,
    regularizer: Regularizer,
    corpus: &LabeledCorpus,
    manifest: &SplitManifest,
    settings: &ModelSettings,
    seed: u64,
) -> Result<ModelArtifact> {
    if !kind.supports(regularizer) {
        return Err(Error::invalid(format!(
            "model {kind} has no embedding layer, so regularizer {regularizer} does not apply"
        )));
    }
    let corpus = training_corpus(corpus, manifest, regularizer, settings, seed)?;
    let (train_pos, _) = corpus.split_positions(manifest)?;
    let labels = corpus.labels().to_vec();
    let settings = &ModelSettings {
        neural: TrainConfig { seed, ..settings.neural.clone() },
        lr: LrConfig { seed, ..settings.lr },
        ..settings.clone()
    };
    let trained_sparse = |with_lr: bool| -> Result<TrainedModel> {
        let docs: Vec<&[String]> = train_pos
            .iter()
            .map(|&i| corpus.documents()[i].tokens.as_slice())
            .collect();
        let y: Vec<usize> = train_pos.iter().map(|&i| corpus.label_of(i)).collect();
        let tfidf = TfIdfModel::fit(&docs, &settings.features)?;
        let x = tfidf.transform_all(&docs);
        Ok(if with_lr {
            let lr = lr_fit(&x, &y, labels.len(), tfidf.n_features(), &settings.lr)?;
            TrainedModel::Lr { labels: labels.clone(), tfidf, lr }
        } else {
            let nb = nb_fit(&x, &y, labels.len(), tfidf.n_features(), settings.nb_alpha)?;
            TrainedModel::Nb { labels: labels.clone(), tfidf, nb }
        })
    };
    let (trained, epochs, grad_stats) = match kind {
        ModelKind::Nb => (trained_sparse(false)?, Vec::new(), None),
        ModelKind::Lr => (trained_sparse(true)?, Vec::new(), None),
        ModelKind::MlpMax => {
            let out = train(&corpus, manifest, &settings.neural, regularizer)?;
            let checkpoint = Checkpoint::from_outcome(&out, &settings.neural, regularizer);
            (TrainedModel::MlpMax { checkpoint }, out.metrics, Some(out.stats))
        }
    };
    Ok(ModelArtifact {
        model: kind,
        regularizer,
        seed,
        settings: settings.clone(),
        trained,
        epochs,
        grad_stats,
    })
}
