//! Synthetic labeled corpora with planted class keywords.
//!
//! Every document mixes context words with a few keyword phrases from its
//! class.
//!
//! - Context words come from one shared vocabulary with Zipf frequencies.
//!   Each context word has a home class. A class draws its home words with
//!   weight `skew` and every other word with weight `1 - skew`, so a skew of
//!   0.5 makes context useless for classification.
//! - A keyword phrase is one or two modifier tokens followed by a head
//!   token. Every group of every class uses the same modifier prefixes.
//!   Heads belong to one keyword group of one class.
//! - Each class splits its documents over `keyword_groups` groups. The first
//!   (major) group receives `major_group_fraction` of them and the rest are
//!   dealt round-robin. A document only uses phrases of its own group, so
//!   documents of different groups share no class-specific token.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabeledCorpus};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub docs_per_class: usize,
    /// Keyword phrases per class, over all of its groups.
    pub keyword_pool_size: usize,
    pub keywords_per_doc: usize,
    /// Total tokens per document, keywords included.
    pub doc_length: usize,
    pub context_vocab_size: usize,
    pub skew: f64,
    pub keyword_groups: usize,
    pub major_group_fraction: f64,
    pub heads_per_group: usize,
    pub modifier_pool_size: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 4,
            docs_per_class: 250,
            keyword_pool_size: 40,
            keywords_per_doc: 2,
            doc_length: 30,
            context_vocab_size: 1000,
            skew: 0.65,
            keyword_groups: 4,
            major_group_fraction: 0.57,
            heads_per_group: 3,
            modifier_pool_size: 20,
            zipf_exponent: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_classes", self.n_classes),
            ("docs_per_class", self.docs_per_class),
            ("keyword_pool_size", self.keyword_pool_size),
            ("keywords_per_doc", self.keywords_per_doc),
            ("doc_length", self.doc_length),
            ("context_vocab_size", self.context_vocab_size),
            ("keyword_groups", self.keyword_groups),
            ("heads_per_group", self.heads_per_group),
            ("modifier_pool_size", self.modifier_pool_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if !(0.5..=1.0).contains(&self.skew) {
            return Err(Error::invalid(format!("skew must lie in [0.5, 1], got {}", self.skew)));
        }
        if !(self.major_group_fraction > 0.0 && self.major_group_fraction <= 1.0) {
            return Err(Error::invalid("major_group_fraction must lie in (0, 1]"));
        }
        if self.keyword_groups > self.keyword_pool_size {
            return Err(Error::invalid("more keyword groups than keyword phrases"));
        }
        if self.keyword_groups > self.docs_per_class {
            return Err(Error::invalid("more keyword groups than documents per class"));
        }
        let per_group = self.keyword_pool_size.div_ceil(self.keyword_groups);
        let m = self.modifier_pool_size;
        if self.heads_per_group * (m + m * m) < per_group {
            return Err(Error::invalid(
                "modifier and head pools are too small for distinct phrases",
            ));
        }
        if !(self.zipf_exponent >= 0.0) {
            return Err(Error::invalid("zipf_exponent must be non-negative"));
        }
        Ok(())
    }
}

/// What the generator planted, for oracle checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Keyword phrases per class.
    pub keywords: BTreeMap<String, Vec<String>>,
    /// Group index of each phrase in `keywords`.
    pub phrase_groups: BTreeMap<String, Vec<usize>>,
    /// Class-specific head tokens per class.
    pub head_tokens: BTreeMap<String, Vec<String>>,
    pub modifier_tokens: Vec<String>,
    pub context_tokens: Vec<String>,
    /// Home class index of each context token.
    pub context_home: Vec<usize>,
    /// Keyword group of every document.
    pub doc_groups: BTreeMap<String, usize>,
}

impl GroundTruth {
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

    /// Every head token of every class.
    pub fn all_head_tokens(&self) -> BTreeSet<&str> {
        self.head_tokens.values().flatten().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: LabeledCorpus,
    pub truth: GroundTruth,
}

pub fn class_label(c: usize) -> String {
    format!("c{c}")
}

fn context_token(i: usize) -> String {
    format!("w{i}")
}

fn modifier_token(i: usize) -> String {
    format!("mod{i}")
}

fn head_token(c: usize, g: usize, j: usize) -> String {
    format!("kw{c}g{g}h{j}")
}

/// Group of each of `n` documents: the major share first, the rest dealt
/// round-robin, then shuffled.
fn assign_groups(n: usize, groups: usize, major: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n_major = if groups == 1 {
        n
    } else {
        ((major * n as f64).round() as usize).clamp(1, n - (groups - 1))
    };
    let mut out = vec![0; n_major];
    out.extend((0..n - n_major).map(|i| 1 + i % (groups - 1).max(1)));
    out.shuffle(rng);
    out
}

pub fn generate(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_c = config.n_classes;
    let context_tokens: Vec<String> = (0..config.context_vocab_size).map(context_token).collect();
    let context_home: Vec<usize> = (0..config.context_vocab_size).map(|i| i % n_c).collect();
    let modifiers: Vec<String> = (0..config.modifier_pool_size).map(modifier_token).collect();

    let samplers: Vec<WeightedIndex<f64>> = (0..n_c)
        .map(|c| {
            let weights = (0..config.context_vocab_size).map(|i| {
                let zipf = 1.0 / ((i + 1) as f64).powf(config.zipf_exponent);
                zipf * if context_home[i] == c { config.skew } else { 1.0 - config.skew }
            });
            WeightedIndex::new(weights).map_err(|e| Error::invalid(format!("context weights: {e}")))
        })
        .collect::<Result<_>>()?;

    // Modifier prefixes are shared: slot j of every group of every class
    // starts with the same modifiers, so modifiers carry no class or group
    // signal.
    let per_group = config.keyword_pool_size.div_ceil(config.keyword_groups);
    let mut prefixes: Vec<(Vec<String>, usize)> = Vec::with_capacity(per_group);
    let mut seen = BTreeSet::new();
    while prefixes.len() < per_group {
        let n_mod = rng.gen_range(1..=2);
        let mods: Vec<String> = (0..n_mod)
            .map(|_| modifiers.choose(&mut rng).expect("nonempty pool").clone())
            .collect();
        let head = rng.gen_range(0..config.heads_per_group);
        if seen.insert((head, mods.clone())) {
            prefixes.push((mods, head));
        }
    }

    let mut keywords = BTreeMap::new();
    let mut phrase_groups = BTreeMap::new();
    let mut head_tokens = BTreeMap::new();
    // phrases[c][g] = token lists
    let mut phrases: Vec<Vec<Vec<Vec<String>>>> = Vec::with_capacity(n_c);
    for c in 0..n_c {
        let mut by_group = vec![Vec::new(); config.keyword_groups];
        let mut flat = Vec::new();
        let mut groups_of = Vec::new();
        for p in 0..config.keyword_pool_size {
            let g = p % config.keyword_groups;
            let (mods, head) = &prefixes[p / config.keyword_groups];
            let mut toks = mods.clone();
            toks.push(head_token(c, g, *head));
            flat.push(toks.join(" "));
            groups_of.push(g);
            by_group[g].push(toks);
        }
        let heads: Vec<String> = (0..config.keyword_groups)
            .flat_map(|g| (0..config.heads_per_group).map(move |j| head_token(c, g, j)))
            .collect();
        keywords.insert(class_label(c), flat);
        phrase_groups.insert(class_label(c), groups_of);
        head_tokens.insert(class_label(c), heads);
        phrases.push(by_group);
    }

    let mut documents = Vec::with_capacity(n_c * config.docs_per_class);
    let mut doc_groups = BTreeMap::new();
    for c in 0..n_c {
        let groups = assign_groups(
            config.docs_per_class,
            config.keyword_groups,
            config.major_group_fraction,
            &mut rng,
        );
        for (i, &g) in groups.iter().enumerate() {
            let chosen: Vec<&Vec<String>> = (0..config.keywords_per_doc)
                .map(|_| phrases[c][g].choose(&mut rng).expect("groups are nonempty"))
                .collect();
            let kw_len: usize = chosen.iter().map(|p| p.len()).sum();
            let n_ctx = config.doc_length.saturating_sub(kw_len);
            let context: Vec<&str> = (0..n_ctx)
                .map(|_| context_tokens[samplers[c].sample(&mut rng)].as_str())
                .collect();
            // insertion gaps, so that phrases never split one another
            let mut gaps: Vec<usize> = (0..chosen.len()).map(|_| rng.gen_range(0..=n_ctx)).collect();
            gaps.sort_unstable();
            let mut tokens: Vec<&str> = Vec::with_capacity(n_ctx + kw_len);
            let mut next = 0;
            for (pos, ctx) in context.iter().chain(std::iter::once(&"")).enumerate() {
                while next < gaps.len() && gaps[next] == pos {
                    tokens.extend(chosen[next].iter().map(String::as_str));
                    next += 1;
                }
                if pos < n_ctx {
                    tokens.push(ctx);
                }
            }
            let id = format!("d{c}_{i:05}");
            doc_groups.insert(id.clone(), g);
            documents.push(Document::new(id, tokens.join(" "), class_label(c)));
        }
    }

    Ok(SyntheticCorpus {
        corpus: LabeledCorpus::new(documents)?,
        truth: GroundTruth {
            keywords,
            phrase_groups,
            head_tokens,
            modifier_tokens: modifiers,
            context_tokens,
            context_home,
            doc_groups,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phrase::PhraseMatcher;

    fn small() -> SynthConfig {
        SynthConfig {
            docs_per_class: 40,
            keyword_pool_size: 12,
            ..Default::default()
        }
    }

    #[test]
    fn shapes() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.corpus.len(), 160);
        assert_eq!(s.corpus.labels(), ["c0", "c1", "c2", "c3"]);
        for d in s.corpus.documents() {
            assert_eq!(d.tokens.len(), 30);
        }
        for ks in s.truth.keywords.values() {
            assert_eq!(ks.len(), 12);
        }
    }

    #[test]
    fn own_keywords_only() {
        let s = generate(&small()).unwrap();
        let matchers: BTreeMap<&String, PhraseMatcher> =
            s.truth.keywords.iter().map(|(c, ps)| (c, PhraseMatcher::new(ps))).collect();
        for d in s.corpus.documents() {
            for (c, m) in &matchers {
                let hits = m.contained(&d.tokens).len();
                if **c == d.label {
                    assert!(hits >= 1, "{} lacks its keywords", d.id);
                } else {
                    assert_eq!(hits, 0, "{} holds keywords of {c}", d.id);
                }
            }
        }
    }

    #[test]
    fn pools_are_disjoint() {
        let s = generate(&SynthConfig::default()).unwrap();
        let mut all = BTreeSet::new();
        for ps in s.truth.keywords.values() {
            for p in ps {
                assert!(all.insert(p.clone()));
            }
        }
    }

    #[test]
    fn major_group_share() {
        let s = generate(&SynthConfig::default()).unwrap();
        let major = s.truth.doc_groups.values().filter(|&&g| g == 0).count();
        assert_eq!(major, 4 * 143);
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.corpus.documents(), b.corpus.documents());
        assert_eq!(a.truth, b.truth);
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.corpus.documents(), c.corpus.documents());
    }

    #[test]
    fn bad_configs() {
        assert!(generate(&SynthConfig { skew: 0.4, ..small() }).is_err());
        assert!(generate(&SynthConfig { n_classes: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { keyword_groups: 13, ..small() }).is_err());
    }
}
