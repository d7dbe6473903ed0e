use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, SplitManifest};
use crate::phrase::PhraseMatcher;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

/// A document holding a lexicon that also occurs on the other side of the
/// split within its class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub class: String,
    pub document: String,
    pub side: Side,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub violations: Vec<Violation>,
    /// Distinct (class, phrase) pairs seen in at least one document.
    pub phrases_checked: usize,
    /// Jaccard overlap of the train and test token vocabularies.
    pub shared_vocab_fraction: f64,
}

impl DisjointnessReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that, within every class, train and test documents share none of
/// the manifest's lexicons.
pub fn verify_disjoint_lexicons(manifest: &SplitManifest, corpus: &LabeledCorpus) -> Result<DisjointnessReport> {
    let (train_pos, test_pos) = corpus.split_positions(manifest)?;
    let mut violations = Vec::new();
    let mut phrases_checked = 0;
    for (label, phrases) in &manifest.lexicons {
        let c = corpus
            .label_index(label)
            .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
        let matcher = PhraseMatcher::new(phrases);
        let side_hits = |positions: &[usize]| -> Vec<(usize, Vec<usize>)> {
            positions
                .iter()
                .filter(|&&i| corpus.label_of(i) == c)
                .map(|&i| (i, matcher.contained(&corpus.documents()[i].tokens)))
                .collect()
        };
        let train_hits = side_hits(&train_pos);
        let test_hits = side_hits(&test_pos);
        let on = |hits: &[(usize, Vec<usize>)]| -> BTreeSet<usize> {
            hits.iter().flat_map(|(_, ps)| ps.iter().copied()).collect()
        };
        let train_side = on(&train_hits);
        let test_side = on(&test_hits);
        phrases_checked += train_side.union(&test_side).count();

        for (hits, other, side) in [(&test_hits, &train_side, Side::Test), (&train_hits, &test_side, Side::Train)] {
            for (i, ps) in hits {
                for p in ps.iter().filter(|p| other.contains(p)) {
                    violations.push(Violation {
                        class: label.clone(),
                        document: corpus.documents()[*i].id.clone(),
                        side,
                        phrase: phrases[*p].clone(),
                    });
                }
            }
        }
    }

    let vocab = |positions: &[usize]| -> HashSet<&str> {
        positions
            .iter()
            .flat_map(|&i| corpus.documents()[i].tokens.iter().map(String::as_str))
            .collect()
    };
    let (v_train, v_test) = (vocab(&train_pos), vocab(&test_pos));
    let union = v_train.union(&v_test).count();
    let shared_vocab_fraction = if union == 0 {
        0.0
    } else {
        v_train.intersection(&v_test).count() as f64 / union as f64
    };
    Ok(DisjointnessReport {
        violations,
        phrases_checked,
        shared_vocab_fraction,
    })
}
