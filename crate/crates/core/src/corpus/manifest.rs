use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabeledCorpus;
use crate::lexicon::LexiconSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Random,
    Lexicon,
}

impl SplitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMethod::Random => "random",
            SplitMethod::Lexicon => "lexicon",
        }
    }
}

impl std::fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitMethod::Random),
            "lexicon" => Ok(SplitMethod::Lexicon),
            _ => Err(Error::invalid(format!("unknown split method {s:?}"))),
        }
    }
}

/// Per-class bookkeeping recorded by the lexicon split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassSplitStats {
    pub train_docs: usize,
    pub test_docs: usize,
    pub components: usize,
    pub largest_component_nodes: usize,
    pub lexicons_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

/// Reproducible record of one train/test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub method: SplitMethod,
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// Per-class phrases that formed the graph; empty for random splits.
    #[serde(default)]
    pub lexicons: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub k_final: usize,
    pub ratio: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub class_stats: BTreeMap<String, ClassSplitStats>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon_set: Option<LexiconSet>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl SplitManifest {
    /// Build a manifest with sorted id lists and `ratio = |test| / |train|`.
    pub fn new(
        method: SplitMethod,
        seed: u64,
        mut train_ids: Vec<String>,
        mut test_ids: Vec<String>,
        config: serde_json::Value,
    ) -> Self {
        train_ids.sort();
        test_ids.sort();
        let ratio = split_ratio(test_ids.len(), train_ids.len());
        SplitManifest {
            method,
            seed,
            train_ids,
            test_ids,
            lexicons: BTreeMap::new(),
            k_final: 0,
            ratio,
            iterations: 0,
            class_stats: BTreeMap::new(),
            warnings: Vec::new(),
            lexicon_set: None,
            config,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Check that train and test partition exactly the corpus' documents.
    pub fn validate(&self, corpus: &LabeledCorpus) -> Result<()> {
        let train: HashSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        let mut seen = train.len();
        if seen != self.train_ids.len() {
            return Err(Error::invalid("manifest train_ids contain duplicates"));
        }
        for id in &self.test_ids {
            if train.contains(id.as_str()) {
                return Err(Error::invalid(format!("document {id} is in both splits")));
            }
            seen += 1;
        }
        for id in self.train_ids.iter().chain(&self.test_ids) {
            if corpus.get(id).is_none() {
                return Err(Error::UnknownId(id.clone()));
            }
        }
        if seen != corpus.len() {
            return Err(Error::invalid(format!(
                "manifest covers {seen} documents, corpus has {}",
                corpus.len()
            )));
        }
        if self.ratio != split_ratio(self.test_ids.len(), self.train_ids.len()) {
            return Err(Error::invalid("manifest ratio does not match its id lists"));
        }
        Ok(())
    }
}

pub(crate) fn split_ratio(test: usize, train: usize) -> f64 {
    if train == 0 {
        f64::INFINITY
    } else {
        test as f64 / train as f64
    }
}
