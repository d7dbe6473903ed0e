use std::collections::BTreeMap;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{
    build_bipartite_graph, connected_components, partition_by_largest_component, BipartiteGraph,
};
use super::union_find::UnionFind;
use crate::corpus::{ClassSplitStats, Document, LabeledCorpus, SplitManifest, SplitMethod};
use crate::features::FeatureConfig;
use crate::lexicon::{LexiconScorer, K_SMALL_CORPUS};
use crate::{Error, Result};

/// Test share used when a class cannot be split through its graph.
const FALLBACK_TEST_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSplitConfig {
    pub k_init: usize,
    /// Minimum acceptable |test| / |train|.
    pub ratio_cutoff: f64,
    pub k_decay: f64,
    pub k_min: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// One graph over all classes instead of one graph per class.
    pub global_graph: bool,
    pub features: FeatureConfig,
}

impl Default for LexiconSplitConfig {
    fn default() -> Self {
        LexiconSplitConfig {
            k_init: K_SMALL_CORPUS,
            ratio_cutoff: 0.6,
            k_decay: 0.9,
            k_min: 10,
            max_iterations: 50,
            seed: 0,
            global_graph: false,
            features: FeatureConfig::default(),
        }
    }
}

impl LexiconSplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_decay > 0.0 && self.k_decay < 1.0) {
            return Err(Error::invalid(format!("k_decay must lie in (0, 1), got {}", self.k_decay)));
        }
        if !(self.ratio_cutoff > 0.0) {
            return Err(Error::invalid(format!(
                "ratio_cutoff must be positive, got {}",
                self.ratio_cutoff
            )));
        }
        if self.k_init == 0 || self.k_min == 0 || self.max_iterations == 0 {
            return Err(Error::invalid("k_init, k_min and max_iterations must be at least 1"));
        }
        Ok(())
    }

    fn next_k(&self, k: usize) -> usize {
        ((k as f64 * self.k_decay).floor() as usize).max(self.k_min)
    }
}

struct ClassOutcome {
    train: Vec<String>,
    test: Vec<String>,
    lexicons_used: usize,
    stats: ClassSplitStats,
    warning: Option<String>,
}

/// Number of leading lexicons after which every document sits in one
/// component, if that ever happens.
fn first_fully_connected(graph: &BipartiteGraph) -> Option<usize> {
    let n_docs = graph.documents.len();
    if n_docs <= 1 {
        return Some(0);
    }
    let mut uf = UnionFind::new(graph.n_nodes());
    let mut docs_in = vec![0usize; graph.n_nodes()];
    for j in 0..n_docs {
        docs_in[graph.doc_node(j)] = 1;
    }
    let mut edges = graph.edges.iter().peekable();
    for lex in 0..graph.lexicons.len() {
        while let Some(&&(l, d)) = edges.peek() {
            if l != lex {
                break;
            }
            edges.next();
            let (ra, rb) = (uf.find(l), uf.find(graph.doc_node(d)));
            if ra != rb {
                let total = docs_in[ra] + docs_in[rb];
                let root = uf.union(ra, rb);
                docs_in[root] = total;
                if total == n_docs {
                    return Some(lex + 1);
                }
            }
        }
    }
    None
}

fn doc_components(labeling: &super::ComponentLabeling) -> usize {
    labeling.doc_counts.iter().filter(|&&n| n > 0).count()
}

fn random_class_split(ids: &[String], seed: u64, stream: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_test = if n < 2 {
        0
    } else {
        ((FALLBACK_TEST_FRACTION * n as f64).round() as usize).clamp(1, n - 1)
    };
    let train = shuffled.split_off(n_test);
    (train, shuffled)
}

fn split_class(graph: &BipartiteGraph, label: &str, class_index: usize, seed: u64) -> ClassOutcome {
    let labeling = connected_components(graph);
    let (train, test) = partition_by_largest_component(graph, &labeling);
    let largest = |lab: &super::ComponentLabeling| lab.sizes.iter().copied().max().unwrap_or(0);
    if !test.is_empty() {
        return ClassOutcome {
            stats: ClassSplitStats {
                train_docs: train.len(),
                test_docs: test.len(),
                components: doc_components(&labeling),
                largest_component_nodes: largest(&labeling),
                lexicons_used: graph.lexicons.len(),
                fallback: None,
            },
            train,
            test,
            lexicons_used: graph.lexicons.len(),
            warning: None,
        };
    }

    // Everything landed in one component: drop the lowest-scoring lexicons
    // until the documents come apart.
    let n_first = first_fully_connected(graph).unwrap_or(graph.lexicons.len() + 1);
    if n_first >= 2 {
        let used = n_first - 1;
        let sub = graph.restrict(used);
        let labeling = connected_components(&sub);
        let (train, test) = partition_by_largest_component(&sub, &labeling);
        let note = format!(
            "dropped {} lowest-scoring lexicon(s) to break a single component",
            graph.lexicons.len() - used
        );
        debug!("class {label}: {note}");
        return ClassOutcome {
            stats: ClassSplitStats {
                train_docs: train.len(),
                test_docs: test.len(),
                components: doc_components(&labeling),
                largest_component_nodes: largest(&labeling),
                lexicons_used: used,
                fallback: Some(note),
            },
            train,
            test,
            lexicons_used: used,
            warning: None,
        };
    }

    let (train, test) = random_class_split(&graph.documents, seed, class_index as u64);
    let msg = format!(
        "WARNING: class {label} could not be separated by its lexicons; \
         used a stratified random {:.0}/{:.0} split for this class",
        100.0 * (1.0 - FALLBACK_TEST_FRACTION),
        100.0 * FALLBACK_TEST_FRACTION
    );
    warn!("{msg}");
    ClassOutcome {
        stats: ClassSplitStats {
            train_docs: train.len(),
            test_docs: test.len(),
            components: 1,
            largest_component_nodes: graph.n_nodes(),
            lexicons_used: 0,
            fallback: Some("random".into()),
        },
        train,
        test,
        lexicons_used: 0,
        warning: Some(msg),
    }
}

struct Attempt {
    train: Vec<String>,
    test: Vec<String>,
    lexicons: BTreeMap<String, Vec<String>>,
    stats: BTreeMap<String, ClassSplitStats>,
    warnings: Vec<String>,
}

/// Lexicon-disjoint split: lexicons from the whole corpus, one bipartite
/// graph per class, largest component to train, with `k` shrinking until
/// `|test| / |train|` reaches the cutoff.
pub fn construct_lexicon_split(corpus: &LabeledCorpus, config: &LexiconSplitConfig) -> Result<SplitManifest> {
    config.validate()?;
    let labels = corpus.labels();
    if labels.len() < 2 {
        return Err(Error::invalid("a lexicon split needs at least two classes"));
    }
    let scorer = LexiconScorer::fit(corpus, &config.features)?;
    let full = scorer.top_k(config.k_init)?;
    let by_class = corpus.positions_by_class();
    let docs_of = |c: usize| -> Vec<&Document> {
        by_class[c].iter().map(|&i| &corpus.documents()[i]).collect()
    };

    // Smaller k selects a prefix of each ranked list, so graphs are built
    // once at k_init and restricted afterwards.
    let class_graphs: Vec<BipartiteGraph> = if config.global_graph {
        Vec::new()
    } else {
        labels
            .iter()
            .enumerate()
            .map(|(c, l)| build_bipartite_graph(&docs_of(c), &full.phrases(l).collect::<Vec<_>>()))
            .collect()
    };
    let (global_graph, global_rank) = if config.global_graph {
        let mut best_rank: BTreeMap<&str, usize> = BTreeMap::new();
        for es in full.classes.values() {
            for (r, e) in es.iter().enumerate() {
                let slot = best_rank.entry(e.phrase.as_str()).or_insert(r);
                *slot = (*slot).min(r);
            }
        }
        let mut ordered: Vec<(usize, &str)> = best_rank.into_iter().map(|(p, r)| (r, p)).collect();
        ordered.sort();
        let all: Vec<&Document> = corpus.documents().iter().collect();
        let phrases: Vec<&str> = ordered.iter().map(|x| x.1).collect();
        let ranks: Vec<usize> = ordered.iter().map(|x| x.0).collect();
        (Some(build_bipartite_graph(&all, &phrases)), ranks)
    } else {
        (None, Vec::new())
    };

    let mut k = config.k_init;
    let mut best_ratio = 0.0f64;
    for iteration in 1..=config.max_iterations {
        let attempt = if let Some(g) = &global_graph {
            let keep = global_rank.iter().take_while(|&&r| r < k).count();
            global_attempt(corpus, &g.restrict(keep), k, &full)
        } else {
            let mut a = Attempt {
                train: Vec::new(),
                test: Vec::new(),
                lexicons: BTreeMap::new(),
                stats: BTreeMap::new(),
                warnings: Vec::new(),
            };
            for (c, label) in labels.iter().enumerate() {
                let g = class_graphs[c].restrict(k);
                let out = split_class(&g, label, c, config.seed);
                a.lexicons.insert(label.clone(), g.lexicons[..out.lexicons_used].to_vec());
                a.train.extend(out.train);
                a.test.extend(out.test);
                a.stats.insert(label.clone(), out.stats);
                a.warnings.extend(out.warning);
            }
            a
        };

        let ratio = crate::corpus::split_ratio(attempt.test.len(), attempt.train.len());
        info!(
            "iteration {iteration}: k = {k}, train = {}, test = {}, ratio = {ratio:.4}",
            attempt.train.len(),
            attempt.test.len()
        );
        best_ratio = best_ratio.max(ratio);
        if ratio >= config.ratio_cutoff {
            let mut m = SplitManifest::new(
                SplitMethod::Lexicon,
                config.seed,
                attempt.train,
                attempt.test,
                serde_json::to_value(config)?,
            );
            m.lexicons = attempt.lexicons;
            m.k_final = k;
            m.iterations = iteration;
            m.class_stats = attempt.stats;
            m.warnings = attempt.warnings;
            m.lexicon_set = Some(truncate_set(&full, k));
            return Ok(m);
        }
        let next = config.next_k(k);
        if next == k && iteration < config.max_iterations {
            return Err(Error::CutoffUnreachable {
                cutoff: config.ratio_cutoff,
                iterations: iteration,
                best_ratio,
            });
        }
        k = next;
    }
    Err(Error::CutoffUnreachable {
        cutoff: config.ratio_cutoff,
        iterations: config.max_iterations,
        best_ratio,
    })
}

fn truncate_set(full: &crate::lexicon::LexiconSet, k: usize) -> crate::lexicon::LexiconSet {
    let mut set = full.clone();
    set.k = k;
    for es in set.classes.values_mut() {
        es.truncate(k);
    }
    set
}

fn global_attempt(
    corpus: &LabeledCorpus,
    graph: &BipartiteGraph,
    k: usize,
    full: &crate::lexicon::LexiconSet,
) -> Attempt {
    let labeling = connected_components(graph);
    let (train, test) = partition_by_largest_component(graph, &labeling);
    let mut stats: BTreeMap<String, ClassSplitStats> = corpus
        .labels()
        .iter()
        .map(|l| (l.clone(), ClassSplitStats::default()))
        .collect();
    for id in &train {
        stats.get_mut(&corpus.get(id).expect("graph ids come from the corpus").label).unwrap().train_docs += 1;
    }
    for id in &test {
        stats.get_mut(&corpus.get(id).expect("graph ids come from the corpus").label).unwrap().test_docs += 1;
    }
    let mut warnings = Vec::new();
    for (label, s) in stats.iter_mut() {
        s.components = doc_components(&labeling);
        s.largest_component_nodes = labeling.sizes.iter().copied().max().unwrap_or(0);
        s.lexicons_used = graph.lexicons.len();
        if s.train_docs == 0 || s.test_docs == 0 {
            warnings.push(format!("WARNING: class {label} is missing from one side of the global-graph split"));
        }
    }
    let lexicons = truncate_set(full, k).phrase_lists();
    Attempt {
        train,
        test,
        lexicons,
        stats,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(LexiconSplitConfig::default().validate().is_ok());
        assert!(LexiconSplitConfig { k_decay: 1.0, ..Default::default() }.validate().is_err());
        assert!(LexiconSplitConfig { ratio_cutoff: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn k_schedule() {
        let c = LexiconSplitConfig::default();
        assert_eq!(c.next_k(150), 135);
        assert_eq!(c.next_k(11), 10);
        assert_eq!(c.next_k(10), 10);
    }

    #[test]
    fn incremental_connectivity() {
        let docs = [
            Document::new("a", "p q", "c"),
            Document::new("b", "q r", "c"),
            Document::new("c", "r", "c"),
        ];
        let refs: Vec<&Document> = docs.iter().collect();
        let g = build_bipartite_graph(&refs, &["q", "r", "p"]);
        // q joins a+b, r then joins c
        assert_eq!(first_fully_connected(&g), Some(2));
        let g = build_bipartite_graph(&refs, &["p"]);
        assert_eq!(first_fully_connected(&g), None);
    }

    #[test]
    fn shared_phrase_triggers_lexicon_dropping() {
        // "common" joins every document; "x1"/"x2" alone would split them
        let docs = [
            Document::new("a", "common x1", "c"),
            Document::new("b", "common x1", "c"),
            Document::new("c", "common x2", "c"),
        ];
        let refs: Vec<&Document> = docs.iter().collect();
        let g = build_bipartite_graph(&refs, &["x1", "x2", "common"]);
        let out = split_class(&g, "c", 0, 0);
        assert_eq!(out.lexicons_used, 2);
        assert_eq!(out.train, ["a", "b"]);
        assert_eq!(out.test, ["c"]);
        assert!(out.stats.fallback.is_some());
    }

    #[test]
    fn inseparable_class_goes_random() {
        let docs: Vec<Document> = (0..10)
            .map(|i| Document::new(format!("d{i}"), "shared words", "c"))
            .collect();
        let refs: Vec<&Document> = docs.iter().collect();
        let g = build_bipartite_graph(&refs, &["shared"]);
        let out = split_class(&g, "c", 0, 5);
        assert_eq!(out.test.len(), 4);
        assert_eq!(out.train.len(), 6);
        assert!(out.warning.unwrap().starts_with("WARNING"));
    }
}
