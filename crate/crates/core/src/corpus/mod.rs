//! Labeled documents, JSONL I/O, vocabularies and random splits.

mod manifest;
mod tokenize;
mod vocab;

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use manifest::{ClassSplitStats, SplitManifest, SplitMethod};
pub(crate) use manifest::split_ratio;
pub use tokenize::{tokenize, PUNCTUATION};
pub use vocab::{Vocabulary, ANON_TOKEN, DEFAULT_MAX_VOCAB, DROP_TOKEN, UNK_TOKEN};

use crate::{Error, Result};

/// Test-to-train ratio used for random splits unless overridden.
pub const DEFAULT_TEST_RATIO: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        let text = text.into();
        Document {
            id: id.into(),
            tokens: tokenize(&text),
            text,
            label: label.into(),
        }
    }

    /// A document whose tokens are given verbatim, bypassing the tokenizer.
    pub fn from_tokens(id: impl Into<String>, tokens: Vec<String>, label: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: tokens.join(" "),
            tokens,
            label: label.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    label: String,
    /// Pre-tokenized content; when present it is used as is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
}

/// A corpus in canonical (id-sorted) order.
#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    documents: Vec<Document>,
    labels: Vec<String>,
    counts: Vec<usize>,
    label_of: Vec<usize>,
    by_id: HashMap<String, usize>,
}

impl LabeledCorpus {
    pub fn new(mut documents: Vec<Document>) -> Result<Self> {
        documents.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = documents.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
        let mut labels: Vec<String> = documents.iter().map(|d| d.label.clone()).collect();
        labels.sort();
        labels.dedup();
        let label_index: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let label_of: Vec<usize> = documents.iter().map(|d| label_index[d.label.as_str()]).collect();
        let mut counts = vec![0; labels.len()];
        for &l in &label_of {
            counts[l] += 1;
        }
        let by_id = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Ok(LabeledCorpus {
            documents,
            labels,
            counts,
            label_of,
            by_id,
        })
    }

    /// Read a JSONL corpus: one `{"id", "text", "label"}` object per line.
    /// A `"tokens"` array, when present, replaces tokenization of `"text"`.
    ///
    /// Blank lines are skipped; malformed lines are reported with their
    /// 1-based line number.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text, path)
    }

    pub(crate) fn parse_jsonl(text: &str, path: &Path) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let docs = lines
            .par_iter()
            .map(|&(i, line)| {
                serde_json::from_str::<Record>(line)
                    .map(|r| match r.tokens {
                        Some(tokens) => Document::from_tokens(r.id, tokens, r.label),
                        None => Document::new(r.id, r.text, r.label),
                    })
                    .map_err(|e| Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(docs)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_records(path.as_ref(), false)
    }

    /// Like [`LabeledCorpus::write_jsonl`], with each document's tokens stored
    /// alongside its text.
    pub fn write_tokenized_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_records(path.as_ref(), true)
    }

    fn write_records(&self, path: &Path, with_tokens: bool) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for d in &self.documents {
            let rec = Record {
                id: d.id.clone(),
                text: d.text.clone(),
                label: d.label.clone(),
                tokens: with_tokens.then(|| d.tokens.clone()),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Sorted class identifiers.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Documents per class, aligned with [`labels`](Self::labels).
    pub fn class_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Class index of the document at position `i`.
    pub fn label_of(&self, i: usize) -> usize {
        self.label_of[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.position(id).map(|i| &self.documents[i])
    }

    /// Document positions grouped by class.
    pub fn positions_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.labels.len()];
        for (i, &l) in self.label_of.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Positions of the given ids, in the order given.
    pub fn positions(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| self.position(id).ok_or_else(|| Error::UnknownId(id.clone())))
            .collect()
    }

    /// Train and test positions of a manifest over this corpus.
    pub fn split_positions(&self, manifest: &SplitManifest) -> Result<(Vec<usize>, Vec<usize>)> {
        manifest.validate(self)?;
        Ok((self.positions(&manifest.train_ids)?, self.positions(&manifest.test_ids)?))
    }

    /// A new corpus holding copies of the given documents.
    pub fn subset(&self, positions: &[usize]) -> Result<LabeledCorpus> {
        LabeledCorpus::new(positions.iter().map(|&i| self.documents[i].clone()).collect())
    }

    /// Average token count per document.
    pub fn mean_length(&self) -> f64 {
        if self.documents.is_empty() {
            return 0.0;
        }
        let total: usize = self.documents.iter().map(|d| d.tokens.len()).sum();
        total as f64 / self.documents.len() as f64
    }
}

/// Number of test documents for a class of `n` documents so that
/// test/train is close to `test_ratio`.
pub(crate) fn stratified_test_count(n: usize, test_ratio: f64) -> usize {
    // nudge so that exact halves round up despite representation error
    let raw = (test_ratio * n as f64 / (1.0 + test_ratio) + 1e-9).round() as usize;
    raw.clamp(1, n - 1)
}

/// Per-class stratified random split.
///
/// Each class is shuffled with one seeded stream (classes visited in label
/// order) and `round(r / (1 + r) * n)` of its documents go to test.
pub fn random_split(corpus: &LabeledCorpus, test_ratio: f64, seed: u64) -> Result<SplitManifest> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::invalid(format!(
            "test_ratio must lie in (0, 1), got {test_ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut members) in corpus.positions_by_class().into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: corpus.labels()[c].clone(),
                count: members.len(),
                required: 2,
            });
        }
        members.shuffle(&mut rng);
        let n_test = stratified_test_count(members.len(), test_ratio);
        for (j, &i) in members.iter().enumerate() {
            let id = corpus.documents()[i].id.clone();
            if j < n_test {
                test.push(id);
            } else {
                train.push(id);
            }
        }
    }
    Ok(SplitManifest::new(
        SplitMethod::Random,
        seed,
        train,
        test,
        serde_json::json!({ "test_ratio": test_ratio }),
    ))
}
