//! Keyword anonymization.
//!
//! Keywords are found on the training documents only. Inside every keyword
//! occurrence one token, picked uniformly at random, becomes `ANON`. During
//! training each `ANON` occurrence is embedded as a fresh random vector.

use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabeledCorpus, ANON_TOKEN};
use crate::features::FeatureConfig;
use crate::lexicon::{extract_lexicons, LexiconSet};
use crate::neural::EMBEDDING_INIT_RANGE;
use crate::phrase::PhraseMatcher;
use crate::{Error, Result};

/// One replaced keyword occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonOccurrence {
    pub doc_id: String,
    pub start: usize,
    pub len: usize,
    /// Absolute token offset that became `ANON`.
    pub replaced: usize,
}

#[derive(Debug, Clone)]
pub struct AnonymizedCorpus {
    pub corpus: LabeledCorpus,
    pub occurrences: Vec<AnonOccurrence>,
}

impl AnonymizedCorpus {
    /// Corpus as JSONL with explicit tokens, and the occurrence log as a
    /// JSONL sidecar.
    pub fn write(&self, corpus_path: impl AsRef<Path>, log_path: impl AsRef<Path>) -> Result<()> {
        self.corpus.write_tokenized_jsonl(corpus_path)?;
        let path = log_path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for occ in &self.occurrences {
            serde_json::to_writer(&mut w, occ)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(corpus_path: impl AsRef<Path>, log_path: impl AsRef<Path>) -> Result<Self> {
        let corpus = LabeledCorpus::load_jsonl(corpus_path)?;
        let path = log_path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let occurrences = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(AnonymizedCorpus { corpus, occurrences })
    }
}

/// Lexicons of the training documents alone.
pub fn identify_training_keywords(train: &LabeledCorpus, k: usize, config: &FeatureConfig) -> Result<LexiconSet> {
    extract_lexicons(train, k, config)
}

/// Replace one random token of every keyword occurrence with `ANON`.
///
/// Occurrences are found by leftmost-longest matching against the keywords
/// of all classes together. Each document draws from its own random stream,
/// keyed by its position in the corpus.
pub fn anonymize_documents(corpus: &LabeledCorpus, keywords: &LexiconSet, seed: u64) -> Result<AnonymizedCorpus> {
    let phrases = keywords.all_phrases();
    anonymize_with_phrases(corpus, &phrases, seed, |_| true)
}

/// [`anonymize_documents`] restricted to documents accepted by `select`;
/// the others are copied unchanged.
pub fn anonymize_with_phrases<F>(
    corpus: &LabeledCorpus,
    phrases: &[String],
    seed: u64,
    select: F,
) -> Result<AnonymizedCorpus>
where
    F: Fn(&Document) -> bool + Sync,
{
    let matcher = PhraseMatcher::new(phrases);
    let results: Vec<(Document, Vec<AnonOccurrence>)> = corpus
        .documents()
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            if !select(doc) {
                return (doc.clone(), Vec::new());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut tokens = doc.tokens.clone();
            let mut occ = Vec::new();
            for m in matcher.leftmost_longest(&doc.tokens) {
                let replaced = m.start + rng.gen_range(0..m.len);
                tokens[replaced] = ANON_TOKEN.to_string();
                occ.push(AnonOccurrence {
                    doc_id: doc.id.clone(),
                    start: m.start,
                    len: m.len,
                    replaced,
                });
            }
            let out = if occ.is_empty() {
                doc.clone()
            } else {
                Document::from_tokens(doc.id.clone(), tokens, doc.label.clone())
            };
            (out, occ)
        })
        .collect();
    let mut documents = Vec::with_capacity(results.len());
    let mut occurrences = Vec::new();
    for (d, o) in results {
        documents.push(d);
        occurrences.extend(o);
    }
    Ok(AnonymizedCorpus {
        corpus: LabeledCorpus::new(documents)?,
        occurrences,
    })
}

/// A fresh embedding for one `ANON` occurrence, uniform in
/// `[-0.1, 0.1]` per component.
pub fn sample_anon_embedding<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let u = Uniform::new_inclusive(-EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE);
    (0..dim).map(|_| u.sample(rng)).collect()
}
