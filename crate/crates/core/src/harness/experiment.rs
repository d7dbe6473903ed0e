use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::models::{fit_model, ModelArtifact, ModelKind, ModelSettings};
use super::report::ExperimentReport;
use crate::baselines::evaluate_accuracy;
use crate::corpus::{random_split, LabeledCorpus, SplitManifest, SplitMethod, DEFAULT_TEST_RATIO};
use crate::neural::Regularizer;
use crate::split_graph::{construct_lexicon_split, LexiconSplitConfig};
use crate::synth::{generate, SynthConfig};
use crate::{Error, Result};

/// Test-side accuracy of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub model: ModelKind,
    pub regularizer: Regularizer,
    pub split: SplitMethod,
    pub seed: u64,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, f64>,
    pub n_test: usize,
    /// Files involved in producing these numbers, keyed by role.
    #[serde(default)]
    pub paths: BTreeMap<String, String>,
    #[serde(default)]
    pub settings: ModelSettings,
}

impl EvalMetrics {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Score a trained model on the manifest's test side.
pub fn evaluate(artifact: &ModelArtifact, corpus: &LabeledCorpus, manifest: &SplitManifest) -> Result<EvalMetrics> {
    let (_, test_pos) = corpus.split_positions(manifest)?;
    let docs: Vec<_> = test_pos.iter().map(|&i| &corpus.documents()[i]).collect();
    let gold: Vec<String> = docs.iter().map(|d| d.label.clone()).collect();
    let predicted = artifact.predict(&docs)?;
    let acc = evaluate_accuracy(&predicted, &gold)?;
    Ok(EvalMetrics {
        model: artifact.model,
        regularizer: artifact.regularizer,
        split: manifest.method,
        seed: artifact.seed,
        accuracy: acc.accuracy,
        per_class: acc.per_class,
        n_test: docs.len(),
        paths: BTreeMap::new(),
        settings: artifact.settings.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub regularizers: Vec<Regularizer>,
    pub seeds: Vec<u64>,
    /// |test| / |train| of the random split.
    pub test_ratio: f64,
    pub lexicon: LexiconSplitConfig,
    pub settings: ModelSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: ModelKind::ALL.to_vec(),
            regularizers: vec![Regularizer::None, Regularizer::Anon, Regularizer::AdaDrop],
            seeds: (0..5).collect(),
            test_ratio: DEFAULT_TEST_RATIO,
            lexicon: LexiconSplitConfig::default(),
            settings: ModelSettings::default(),
        }
    }
}

/// One trained and evaluated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub model: ModelKind,
    pub regularizer: Regularizer,
    pub split: SplitMethod,
    pub seed: u64,
}

impl Cell {
    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}_s{}", self.model, self.regularizer, self.split, self.seed)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.regularizers.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("an experiment needs at least one model, regularizer and seed"));
        }
        if !(self.test_ratio > 0.0 && self.test_ratio.is_finite()) {
            return Err(Error::invalid(format!("test ratio must be positive, got {}", self.test_ratio)));
        }
        if self.cells().is_empty() {
            return Err(Error::invalid("no model supports any of the requested regularizers"));
        }
        self.lexicon.validate()?;
        self.settings.neural.validate()
    }

    /// Every supported (model, regularizer) pair on both splits and all
    /// seeds. Sparse models have no embeddings, so adaptive dropout skips them.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &model in &self.models {
            for &regularizer in &self.regularizers {
                if !model.supports(regularizer) {
                    continue;
                }
                for split in [SplitMethod::Random, SplitMethod::Lexicon] {
                    for &seed in &self.seeds {
                        out.push(Cell { model, regularizer, split, seed });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub metrics: Vec<EvalMetrics>,
    pub report: ExperimentReport,
    pub manifests: BTreeMap<(SplitMethod, u64), SplitManifest>,
}

/// Build both splits for every seed, train each cell and aggregate the
/// accuracies. With `out_dir`, manifests, per-cell metrics and the report
/// are written there as they become available.
pub fn run_gap_experiment(
    corpus: &LabeledCorpus,
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let splits: Vec<((SplitMethod, u64), SplitManifest)> = config
        .seeds
        .par_iter()
        .flat_map_iter(|&seed| [(SplitMethod::Random, seed), (SplitMethod::Lexicon, seed)])
        .map(|(method, seed)| {
            let manifest = match method {
                SplitMethod::Random => random_split(corpus, config.test_ratio, seed)?,
                SplitMethod::Lexicon => {
                    let cfg = LexiconSplitConfig { seed, ..config.lexicon.clone() };
                    construct_lexicon_split(corpus, &cfg)?
                }
            };
            info!("{method} split, seed {seed}: ratio {:.3}", manifest.ratio);
            Ok(((method, seed), manifest))
        })
        .collect::<Result<_>>()?;
    let manifests: BTreeMap<_, _> = splits.into_iter().collect();
    let manifest_paths: BTreeMap<(SplitMethod, u64), PathBuf> = match out_dir {
        None => BTreeMap::new(),
        Some(dir) => manifests
            .iter()
            .map(|(&(method, seed), m)| {
                let p = dir.join(format!("split_{method}_s{seed}.json"));
                m.write(&p)?;
                Ok(((method, seed), p))
            })
            .collect::<Result<_>>()?,
    };

    let cells = config.cells();
    let metrics: Vec<EvalMetrics> = cells
        .par_iter()
        .map(|cell| {
            let manifest = &manifests[&(cell.split, cell.seed)];
            let artifact = fit_model(cell.model, cell.regularizer, corpus, manifest, &config.settings, cell.seed)?;
            let mut m = evaluate(&artifact, corpus, manifest)?;
            info!("{}: accuracy {:.4}", cell.file_stem(), m.accuracy);
            if let Some(dir) = out_dir {
                let mp = &manifest_paths[&(cell.split, cell.seed)];
                m.paths.insert("manifest".into(), mp.display().to_string());
                let p = dir.join(format!("metrics_{}.json", cell.file_stem()));
                m.paths.insert("metrics".into(), p.display().to_string());
                m.write(&p)?;
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    let report = ExperimentReport::from_metrics(&metrics);
    if let Some(dir) = out_dir {
        report.write_tsv(dir.join("report.tsv"))?;
    }
    Ok(ExperimentOutcome {
        metrics,
        report,
        manifests,
    })
}

/// The gap experiment on synthetic data: every seed gets its own generated
/// corpus (generator seed = experiment seed) and its own pair of splits.
/// With `out_dir`, each seed's corpus, ground truth, manifests and metrics
/// go to `seed<N>/` and the combined report to `report.tsv`.
pub fn run_synthetic_benchmark(
    synth: &SynthConfig,
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let per_seed: Vec<ExperimentOutcome> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let generated = generate(&SynthConfig { seed, ..synth.clone() })?;
            let dir = out_dir.map(|d| d.join(format!("seed{seed}")));
            let mut corpus_path = None;
            if let Some(dir) = &dir {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let p = dir.join("corpus.jsonl");
                generated.corpus.write_jsonl(&p)?;
                generated.truth.write(dir.join("truth.json"))?;
                corpus_path = Some(p.display().to_string());
            }
            let cfg = ExperimentConfig {
                seeds: vec![seed],
                ..config.clone()
            };
            let mut out = run_gap_experiment(&generated.corpus, &cfg, dir.as_deref())?;
            if let Some(p) = corpus_path {
                for m in &mut out.metrics {
                    m.paths.insert("corpus".into(), p.clone());
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut metrics = Vec::new();
    let mut manifests = BTreeMap::new();
    for out in per_seed {
        metrics.extend(out.metrics);
        manifests.extend(out.manifests);
    }
    let mut report = ExperimentReport::from_metrics(&metrics);
    report.notes.insert(
        0,
        format!(
            "synthetic benchmark: one corpus per seed; classes={} docs_per_class={} skew={}",
            synth.n_classes, synth.docs_per_class, synth.skew
        ),
    );
    if let Some(dir) = out_dir {
        report.write_tsv(dir.join("report.tsv"))?;
    }
    Ok(ExperimentOutcome {
        metrics,
        report,
        manifests,
    })
}
