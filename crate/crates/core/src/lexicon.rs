//! Class-specific lexicons from naive Bayes feature weights.
//!
//! Each feature's per-class probability is divided by its smallest value
//! across classes. The result is a specificity ratio that is exactly 1 for
//! the class where the feature is rarest and grows with how much more often
//! the feature shows up in a given class. The `k` largest ratios of each class
//! form its lexicon.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::{nb_fit, NbModel, DEFAULT_ALPHA};
use crate::corpus::LabeledCorpus;
use crate::features::{FeatureConfig, FeatureSpace, TfIdfModel};
use crate::{Error, Result};

/// Lexicon size used for review-style corpora with large vocabularies.
pub const K_LARGE_CORPUS: usize = 1500;
/// Lexicon size used for abstract-style corpora and desk-scale runs.
pub const K_SMALL_CORPUS: usize = 150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub phrase: String,
    pub score: f64,
}

/// Ranked phrases per class.
///
/// Serialized as a flat JSON object: one key per class holding
/// `[{"phrase", "score"}, ...]`, plus `"k"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, serde_json::Value>", into = "BTreeMap<String, serde_json::Value>")]
pub struct LexiconSet {
    pub k: usize,
    pub classes: BTreeMap<String, Vec<LexiconEntry>>,
}

impl LexiconSet {
    pub fn phrases(&self, class: &str) -> impl Iterator<Item = &str> {
        self.classes
            .get(class)
            .into_iter()
            .flatten()
            .map(|e| e.phrase.as_str())
    }

    /// Every phrase of every class, deduplicated and sorted.
    pub fn all_phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .classes
            .values()
            .flatten()
            .map(|e| e.phrase.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Plain phrase lists, the form stored in split manifests.
    pub fn phrase_lists(&self) -> BTreeMap<String, Vec<String>> {
        self.classes
            .iter()
            .map(|(c, es)| (c.clone(), es.iter().map(|e| e.phrase.clone()).collect()))
            .collect()
    }
}

impl TryFrom<BTreeMap<String, serde_json::Value>> for LexiconSet {
    type Error = String;

    fn try_from(mut map: BTreeMap<String, serde_json::Value>) -> Result<Self, String> {
        let k = map
            .remove("k")
            .and_then(|v| v.as_u64())
            .ok_or("lexicon set is missing an integer \"k\"")? as usize;
        let classes = map
            .into_iter()
            .map(|(c, v)| {
                serde_json::from_value::<Vec<LexiconEntry>>(v)
                    .map(|es| (c.clone(), es))
                    .map_err(|e| format!("class {c}: {e}"))
            })
            .collect::<Result<_, _>>()?;
        Ok(LexiconSet { k, classes })
    }
}

impl From<LexiconSet> for BTreeMap<String, serde_json::Value> {
    fn from(set: LexiconSet) -> Self {
        let mut out: BTreeMap<String, serde_json::Value> = set
            .classes
            .into_iter()
            .map(|(c, es)| (c, serde_json::to_value(es).expect("entries serialize")))
            .collect();
        out.insert("k".into(), set.k.into());
        out
    }
}

/// `R[c][f] = theta[c][f] / min_c' theta[c'][f]`.
pub fn rescale_weights(model: &NbModel) -> Result<Vec<Vec<f64>>> {
    let theta = &model.theta;
    let n_features = model.n_features();
    let mut mins = vec![f64::INFINITY; n_features];
    for row in theta {
        for (f, &t) in row.iter().enumerate() {
            if !(t > 0.0) {
                return Err(Error::invalid(format!(
                    "feature weight {t} at feature {f} is not strictly positive"
                )));
            }
            mins[f] = mins[f].min(t);
        }
    }
    Ok(theta
        .iter()
        .map(|row| row.iter().zip(&mins).map(|(t, m)| t / m).collect())
        .collect())
}

/// Indices of the `k` largest entries of `scores`, ties to the lower index.
pub(crate) fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let order = |a: &usize, b: &usize| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, order);
        idx.truncate(k);
    }
    idx.sort_by(order);
    idx
}

/// Keep the `k` highest-scoring features of each class.
pub fn select_top_k(
    rescaled: &[Vec<f64>],
    space: &FeatureSpace,
    labels: &[String],
    k: usize,
) -> Result<LexiconSet> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if rescaled.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rescaled.len(),
            right: labels.len(),
        });
    }
    let classes = rescaled
        .iter()
        .zip(labels)
        .map(|(row, label)| {
            let entries = top_k_indices(row, k)
                .into_iter()
                .map(|f| LexiconEntry {
                    phrase: space.ngram(f).to_string(),
                    score: row[f],
                })
                .collect();
            (label.clone(), entries)
        })
        .collect();
    Ok(LexiconSet { k, classes })
}

/// tf-idf features, naive Bayes and rescaled weights fitted once over a
/// corpus, so that lexicons of any size can be read off cheaply.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    pub tfidf: TfIdfModel,
    pub nb: NbModel,
    pub rescaled: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl LexiconScorer {
    pub fn fit(corpus: &LabeledCorpus, config: &FeatureConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot extract lexicons from an empty corpus"));
        }
        if corpus.labels().len() < 2 {
            return Err(Error::invalid(
                "lexicon extraction needs at least two classes to rescale weights",
            ));
        }
        let docs: Vec<&[String]> = corpus.documents().iter().map(|d| d.tokens.as_slice()).collect();
        let tfidf = TfIdfModel::fit(&docs, config)?;
        let vectors = tfidf.transform_all(&docs);
        let labels: Vec<usize> = (0..corpus.len()).map(|i| corpus.label_of(i)).collect();
        let nb = nb_fit(
            &vectors,
            &labels,
            corpus.labels().len(),
            tfidf.n_features(),
            DEFAULT_ALPHA,
        )?;
        let rescaled = rescale_weights(&nb)?;
        Ok(LexiconScorer {
            tfidf,
            nb,
            rescaled,
            labels: corpus.labels().to_vec(),
        })
    }

    pub fn top_k(&self, k: usize) -> Result<LexiconSet> {
        select_top_k(&self.rescaled, &self.tfidf.space, &self.labels, k)
    }
}

/// Fit tf-idf and naive Bayes on `corpus`, rescale, and take the top `k`
/// phrases per class.
pub fn extract_lexicons(corpus: &LabeledCorpus, k: usize, config: &FeatureConfig) -> Result<LexiconSet> {
    LexiconScorer::fit(corpus, config)?.top_k(k)
}
