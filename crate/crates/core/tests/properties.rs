use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array1;
use proptest::prelude::*;

use lexsplit::adadrop::drop_probability;
use lexsplit::anonymize::anonymize_with_phrases;
use lexsplit::baselines::{nb_fit, nb_predict};
use lexsplit::corpus::{random_split, Document, LabeledCorpus, SplitMethod, ANON_TOKEN};
use lexsplit::features::{FeatureConfig, SparseVector, TfIdfModel};
use lexsplit::harness::{EvalMetrics, ExperimentReport, ModelKind, ModelSettings};
use lexsplit::neural::{clip_global_norm, GradientBuffer, Regularizer};
use lexsplit::split_graph::{connected_components, BipartiteGraph, UnionFind};
use lexsplit::synth::{generate, SynthConfig};

const WORDS: &[&str] = &["good", "bad", "plot", "film", "great", "dull", "the", "a"];

fn docs_strategy() -> impl Strategy<Value = Vec<(Vec<usize>, bool)>> {
    prop::collection::vec((prop::collection::vec(0..WORDS.len(), 1..12), any::<bool>()), 4..30)
}

fn corpus_of(docs: &[(Vec<usize>, bool)]) -> LabeledCorpus {
    LabeledCorpus::new(
        docs.iter()
            .enumerate()
            .map(|(i, (w, pos))| {
                let text: Vec<&str> = w.iter().map(|&k| WORDS[k]).collect();
                Document::new(format!("d{i:03}"), text.join(" "), if *pos { "pos" } else { "neg" })
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_are_reachability_classes(
        n_lex in 1usize..12,
        n_doc in 1usize..12,
        raw in prop::collection::vec((0usize..12, 0usize..12), 0..40),
    ) {
        let edges: Vec<(usize, usize)> = {
            let mut e: Vec<_> = raw.into_iter().map(|(l, d)| (l % n_lex, d % n_doc)).collect();
            e.sort_unstable();
            e.dedup();
            e
        };
        let g = BipartiteGraph {
            lexicons: (0..n_lex).map(|i| i.to_string()).collect(),
            documents: (0..n_doc).map(|j| j.to_string()).collect(),
            edges: edges.clone(),
        };
        let labels = connected_components(&g);
        // transitive closure by repeated relaxation
        let n = n_lex + n_doc;
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(l, d) in &edges {
            reach[l][n_lex + d] = true;
            reach[n_lex + d][l] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(labels.component[i] == labels.component[j], reach[i][j]);
            }
        }
        let mut uf = UnionFind::new(n);
        for &(l, d) in &edges {
            uf.union(l, n_lex + d);
        }
        for i in 0..n {
            prop_assert_eq!(uf.set_size(i), reach[i].iter().filter(|&&r| r).count());
        }
    }

    #[test]
    fn random_split_partitions_and_repeats(docs in docs_strategy(), ratio in 0.1f64..0.9, seed in any::<u64>()) {
        let c = corpus_of(&docs);
        prop_assume!(c.class_counts().iter().all(|&n| n >= 2));
        let m = random_split(&c, ratio, seed).unwrap();
        prop_assert_eq!(m.method, SplitMethod::Random);
        prop_assert_eq!(m.train_ids.len() + m.test_ids.len(), c.len());
        let mut all: Vec<&String> = m.train_ids.iter().chain(&m.test_ids).collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), c.len());
        m.validate(&c).unwrap();
        prop_assert_eq!(random_split(&c, ratio, seed).unwrap(), m);
    }

    #[test]
    fn tfidf_rows_are_unit_or_empty(docs in docs_strategy()) {
        let c = corpus_of(&docs);
        let toks: Vec<&[String]> = c.documents().iter().map(|d| d.tokens.as_slice()).collect();
        let cfg = FeatureConfig { n_max: 3, ..Default::default() };
        if let Ok(model) = TfIdfModel::fit(&toks, &cfg) {
            for v in model.transform_all(&toks) {
                prop_assert!(v.entries().iter().all(|&(_, x)| x > 0.0));
                prop_assert!(v.is_empty() || (v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nb_posteriors_normalize(
        rows in prop::collection::vec((prop::collection::vec(0.0f64..3.0, 5), 0usize..3), 3..12),
        query in prop::collection::vec(0.0f64..3.0, 5),
        alpha in 0.1f64..2.0,
    ) {
        let x: Vec<SparseVector> = rows
            .iter()
            .map(|(v, _)| SparseVector::from_pairs(v.iter().enumerate().map(|(f, &x)| (f as u32, x))))
            .collect();
        let y: Vec<usize> = rows.iter().map(|(_, c)| *c).collect();
        prop_assume!((0..3).all(|c| y.contains(&c)));
        let model = nb_fit(&x, &y, 3, 5, alpha).unwrap();
        let q = SparseVector::from_pairs(query.iter().enumerate().map(|(f, &x)| (f as u32, x)));
        let (best, log_post) = nb_predict(&model, &q);
        let total: f64 = log_post.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(log_post.iter().all(|&l| l <= log_post[best]));
    }

    #[test]
    fn drop_probability_is_bounded_and_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, t in 1e-5f64..1e-2, p_max in 0.0f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (drop_probability(lo, t, p_max), drop_probability(hi, t, p_max));
        prop_assert!((0.0..=p_max).contains(&p_lo) && (0.0..=p_max).contains(&p_hi));
        prop_assert!(p_lo <= p_hi);
        if hi <= t {
            prop_assert_eq!(p_hi, 0.0);
        }
    }

    #[test]
    fn anonymization_replaces_one_token_per_occurrence(docs in docs_strategy(), seed in any::<u64>()) {
        let c = corpus_of(&docs);
        let phrases = vec!["good".to_string(), "bad plot".to_string(), "the film".to_string()];
        let a = anonymize_with_phrases(&c, &phrases, seed, |d| d.label == "pos").unwrap();
        let mut per_doc: BTreeMap<&str, usize> = BTreeMap::new();
        for o in &a.occurrences {
            *per_doc.entry(o.doc_id.as_str()).or_default() += 1;
            prop_assert!(o.start <= o.replaced && o.replaced < o.start + o.len);
        }
        for (before, after) in c.documents().iter().zip(a.corpus.documents()) {
            prop_assert_eq!(before.tokens.len(), after.tokens.len());
            let changed: Vec<usize> = (0..before.tokens.len()).filter(|&i| before.tokens[i] != after.tokens[i]).collect();
            prop_assert!(changed.iter().all(|&i| after.tokens[i] == ANON_TOKEN));
            let n = per_doc.get(before.id.as_str()).copied().unwrap_or(0);
            prop_assert_eq!(changed.len(), n);
            if before.label != "pos" {
                prop_assert_eq!(n, 0);
            }
        }
    }

    #[test]
    fn clipping_bounds_the_global_norm(vals in prop::collection::vec(-50.0f64..50.0, 6), max_norm in 0.1f64..10.0) {
        let mut g = GradientBuffer::zeros(2, 2, 1);
        g.b1 = Array1::from(vals[..2].to_vec());
        g.embedding.insert(3, Array1::from(vals[2..4].to_vec()));
        g.b2 = Array1::from(vals[4..5].to_vec());
        let before = g.global_norm();
        let reported = clip_global_norm(&mut g, max_norm);
        prop_assert_eq!(reported, before);
        prop_assert!(g.global_norm() <= max_norm * (1.0 + 1e-12));
        if before <= max_norm {
            prop_assert_eq!(g.global_norm(), before);
        }
    }

    #[test]
    fn report_tsv_round_trips(accs in prop::collection::vec(0.0f64..=1.0, 12)) {
        let mut metrics = Vec::new();
        let mut i = 0;
        for model in [ModelKind::Nb, ModelKind::MlpMax] {
            for split in [SplitMethod::Random, SplitMethod::Lexicon] {
                for seed in 0..3 {
                    metrics.push(EvalMetrics {
                        model,
                        regularizer: Regularizer::None,
                        split,
                        seed,
                        accuracy: accs[i],
                        per_class: BTreeMap::new(),
                        n_test: 10,
                        paths: BTreeMap::new(),
                        settings: ModelSettings::default(),
                    });
                    i += 1;
                }
            }
        }
        let r = ExperimentReport::from_metrics(&metrics);
        prop_assert_eq!(r.rows.len(), 4);
        for row in &r.rows {
            prop_assert!((0.0..=1.0).contains(&row.accuracy));
            prop_assert_eq!(row.seed_count, 3);
        }
        let text = r.to_tsv();
        let back = ExperimentReport::parse_tsv(&text, Path::new("r.tsv")).unwrap();
        prop_assert_eq!(back.to_tsv(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn synthetic_corpora_round_trip_through_jsonl(seed in any::<u64>(), skew in 0.5f64..=1.0) {
        let s = generate(&SynthConfig { docs_per_class: 20, skew, seed, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        s.corpus.write_jsonl(&p).unwrap();
        let back = LabeledCorpus::load_jsonl(&p).unwrap();
        prop_assert_eq!(back.documents(), s.corpus.documents());
        prop_assert_eq!(back.class_counts(), &[20, 20, 20, 20][..]);
    }
}
