//! tf-idf weighted word n-gram features.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Contiguous n-grams of every order in `n_min..=n_max`, joined by single
/// spaces, with multiplicities.
///
/// ```
/// # use lexsplit::features::extract_ngrams;
/// let toks: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
/// let grams = extract_ngrams(&toks, 1, 2);
/// assert_eq!(grams.len(), 5);
/// assert_eq!(grams["b c"], 1);
/// ```
pub fn extract_ngrams(tokens: &[String], n_min: usize, n_max: usize) -> HashMap<String, usize> {
    let mut out = HashMap::new();
    for gram in windows(tokens, n_min, n_max) {
        *out.entry(gram.join(" ")).or_default() += 1;
    }
    out
}

/// All contiguous windows of length `n_min..=n_max`.
pub(crate) fn windows(
    tokens: &[String],
    n_min: usize,
    n_max: usize,
) -> impl Iterator<Item = &[String]> + '_ {
    let n_min = n_min.max(1);
    (n_min..=n_max).flat_map(move |n| tokens.windows(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub min_df: usize,
    pub max_features: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            n_min: 1,
            n_max: 5,
            min_df: 2,
            max_features: 1 << 20,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureSpaceRepr {
    n_min: usize,
    n_max: usize,
    ngrams: Vec<String>,
    df: Vec<u32>,
}

/// n-gram to dense feature id, with document frequencies.
///
/// Ids follow the ranking used for truncation: document frequency
/// descending, then lexicographic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "FeatureSpaceRepr", into = "FeatureSpaceRepr")]
pub struct FeatureSpace {
    n_min: usize,
    n_max: usize,
    ngrams: Vec<String>,
    df: Vec<u32>,
    index: HashMap<Vec<String>, u32>,
}

impl From<FeatureSpaceRepr> for FeatureSpace {
    fn from(r: FeatureSpaceRepr) -> Self {
        let index = r
            .ngrams
            .iter()
            .enumerate()
            .map(|(i, g)| (g.split(' ').map(str::to_string).collect(), i as u32))
            .collect();
        FeatureSpace {
            n_min: r.n_min,
            n_max: r.n_max,
            ngrams: r.ngrams,
            df: r.df,
            index,
        }
    }
}

impl From<FeatureSpace> for FeatureSpaceRepr {
    fn from(s: FeatureSpace) -> Self {
        FeatureSpaceRepr {
            n_min: s.n_min,
            n_max: s.n_max,
            ngrams: s.ngrams,
            df: s.df,
        }
    }
}

impl FeatureSpace {
    /// Count document frequencies over `docs` and keep features with
    /// `df >= min_df`, capped at `max_features`.
    pub fn fit(docs: &[&[String]], config: &FeatureConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("cannot fit a feature space on an empty corpus"));
        }
        if config.n_min > config.n_max {
            return Err(Error::invalid("n_min must not exceed n_max"));
        }
        let (n_min, n_max) = (config.n_min.max(1), config.n_max);
        let df: HashMap<&[String], u32> = docs
            .par_chunks(256)
            .map(|chunk| {
                let mut local: HashMap<&[String], u32> = HashMap::new();
                let mut seen = std::collections::HashSet::new();
                for doc in chunk {
                    seen.clear();
                    for w in windows(doc, n_min, n_max) {
                        if seen.insert(w) {
                            *local.entry(w).or_default() += 1;
                        }
                    }
                }
                local
            })
            .reduce(HashMap::new, |mut a, b| {
                if a.len() < b.len() {
                    return merge(b, a);
                }
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            });

        let min_df = config.min_df.max(1) as u32;
        let mut kept: Vec<(String, &[String], u32)> = df
            .into_iter()
            .filter(|&(_, d)| d >= min_df)
            .map(|(g, d)| (g.join(" "), g, d))
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyFeatureSpace {
                min_df: config.min_df,
            });
        }
        kept.par_sort_unstable_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        kept.truncate(config.max_features);

        let mut space = FeatureSpace {
            n_min,
            n_max,
            ngrams: Vec::with_capacity(kept.len()),
            df: Vec::with_capacity(kept.len()),
            index: HashMap::with_capacity(kept.len()),
        };
        for (i, (joined, gram, d)) in kept.into_iter().enumerate() {
            space.index.insert(gram.to_vec(), i as u32);
            space.ngrams.push(joined);
            space.df.push(d);
        }
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn ngram(&self, id: usize) -> &str {
        &self.ngrams[id]
    }

    pub fn ngrams(&self) -> &[String] {
        &self.ngrams
    }

    pub fn df(&self, id: usize) -> u32 {
        self.df[id]
    }

    pub fn id_of(&self, gram: &[String]) -> Option<u32> {
        self.index.get(gram).copied()
    }

    pub fn order_range(&self) -> (usize, usize) {
        (self.n_min, self.n_max)
    }

    /// Raw term counts of known features in a token sequence.
    pub fn counts(&self, tokens: &[String]) -> HashMap<u32, f64> {
        let mut out = HashMap::new();
        for w in windows(tokens, self.n_min, self.n_max) {
            if let Some(id) = self.id_of(w) {
                *out.entry(id).or_insert(0.0) += 1.0;
            }
        }
        out
    }

    /// `feature_id \t ngram \t df`, one feature per line.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (i, (g, d)) in self.ngrams.iter().zip(&self.df).enumerate() {
            out.push_str(&format!("{i}\t{g}\t{d}\n"));
        }
        fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn merge<'a>(
    mut big: HashMap<&'a [String], u32>,
    small: HashMap<&'a [String], u32>,
) -> HashMap<&'a [String], u32> {
    for (k, v) in small {
        *big.entry(k).or_default() += v;
    }
    big
}

/// Sorted `(feature id, value)` pairs without explicit zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Build from arbitrary pairs; zeros are dropped and ids sorted.
    /// Duplicate ids are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (id, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == id => last.1 += v,
                _ => merged.push((id, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        SparseVector { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|&(i, v)| (i as usize, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i as usize]).sum()
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }
}

/// Feature space plus smoothed idf weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub space: FeatureSpace,
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

/// `ln((1 + n_docs) / (1 + df)) + 1`
pub fn smoothed_idf(n_docs: usize, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfIdfModel {
    pub fn fit(docs: &[&[String]], config: &FeatureConfig) -> Result<Self> {
        let space = FeatureSpace::fit(docs, config)?;
        let n_docs = docs.len();
        let idf = (0..space.len()).map(|f| smoothed_idf(n_docs, space.df(f))).collect();
        Ok(TfIdfModel { space, idf, n_docs })
    }

    /// Raw count times idf, L2-normalized; unknown n-grams are ignored.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let weighted = self
            .space
            .counts(tokens)
            .into_iter()
            .map(|(f, tf)| (f, tf * self.idf[f as usize]));
        let mut v = SparseVector::from_pairs(weighted);
        let norm = v.norm();
        if norm > 0.0 {
            for e in &mut v.entries {
                e.1 /= norm;
            }
        }
        v
    }

    pub fn transform_all(&self, docs: &[&[String]]) -> Vec<SparseVector> {
        docs.par_iter().map(|d| self.transform(d)).collect()
    }

    pub fn n_features(&self) -> usize {
        self.space.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn fit(docs: &[Vec<String>], cfg: FeatureConfig) -> Result<TfIdfModel> {
        let refs: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
        TfIdfModel::fit(&refs, &cfg)
    }

    #[test]
    fn ngram_enumeration() {
        let g = extract_ngrams(&toks("a b c"), 1, 2);
        let want: HashMap<String, usize> = [("a", 1), ("b", 1), ("c", 1), ("a b", 1), ("b c", 1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(g, want);
        assert_eq!(extract_ngrams(&toks("a"), 1, 5), HashMap::from([("a".to_string(), 1)]));
        assert_eq!(extract_ngrams(&toks("a a"), 1, 1), HashMap::from([("a".to_string(), 2)]));
    }

    #[test]
    fn min_df_threshold() {
        let docs = vec![toks("a b"), toks("a c")];
        let m = fit(&docs, FeatureConfig { min_df: 2, ..Default::default() }).unwrap();
        assert_eq!(m.space.ngrams(), ["a"]);
        let all = fit(&docs, FeatureConfig { min_df: 1, ..Default::default() }).unwrap();
        // a, b, c, "a b", "a c"
        assert_eq!(all.n_features(), 5);
    }

    #[test]
    fn empty_space_is_an_error() {
        let docs = vec![toks("a"), toks("b")];
        assert!(matches!(
            fit(&docs, FeatureConfig::default()),
            Err(Error::EmptyFeatureSpace { .. })
        ));
    }

    #[test]
    fn ids_reproducible_and_ranked() {
        let docs: Vec<Vec<String>> = (0..10)
            .map(|i| toks(&format!("w{} common x{} common", i % 3, i % 2)))
            .collect();
        let a = fit(&docs, FeatureConfig::default()).unwrap();
        let b = fit(&docs, FeatureConfig::default()).unwrap();
        assert_eq!(a.space.ngrams(), b.space.ngrams());
        assert_eq!(a.space.ngram(0), "common");
        let dfs: Vec<u32> = (0..a.n_features()).map(|f| a.space.df(f)).collect();
        assert!(dfs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn max_features_cap() {
        let docs = vec![toks("a b c"), toks("a b c")];
        let m = fit(&docs, FeatureConfig { max_features: 2, ..Default::default() }).unwrap();
        // all six n-grams have df 2; lexicographic tie-break keeps "a", "a b"
        assert_eq!(m.space.ngrams(), ["a", "a b"]);
    }

    #[test]
    fn idf_hand_value() {
        // three documents, "rare" in one of them
        let docs = vec![toks("rare x"), toks("x y"), toks("y z")];
        let m = fit(&docs, FeatureConfig { min_df: 1, ..Default::default() }).unwrap();
        let id = m.space.id_of(&toks("rare")).unwrap() as usize;
        assert!((m.idf[id] - ((4.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
        assert!((m.idf[id] - 1.693_147_180_559_945).abs() < 1e-12);
    }

    #[test]
    fn transform_edge_cases() {
        let docs = vec![toks("a b"), toks("a c")];
        let m = fit(&docs, FeatureConfig::default()).unwrap();
        assert!(m.transform(&toks("zzz qqq")).is_empty());
        let v = m.transform(&toks("a"));
        assert_eq!(v.entries(), &[(0, 1.0)]);
    }

    #[test]
    fn sparse_vector_normalizes_input() {
        let v = SparseVector::from_pairs([(3, 1.0), (1, 0.0), (3, 2.0), (0, -1.0)]);
        assert_eq!(v.entries(), &[(0, -1.0), (3, 3.0)]);
        assert_eq!(v.get(3), 3.0);
        assert_eq!(v.get(2), 0.0);
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let docs = vec![toks("a b c"), toks("a b d")];
        let m = fit(&docs, FeatureConfig::default()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: TfIdfModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.transform(&toks("a b x")), m.transform(&toks("a b x")));
    }

    proptest! {
        #[test]
        fn ngram_count_formula(len in 0usize..30, n_max in 1usize..6) {
            let tokens: Vec<String> = (0..len).map(|i| format!("t{i}")).collect();
            let total: usize = extract_ngrams(&tokens, 1, n_max).values().sum();
            let expect: usize = (1..=n_max).map(|n| (len + 1).saturating_sub(n)).sum();
            prop_assert_eq!(total, expect);
        }

        #[test]
        fn unit_norm_and_idf_monotone(
            docs in proptest::collection::vec(proptest::collection::vec(0u8..6, 1..12), 2..15),
        ) {
            let docs: Vec<Vec<String>> = docs
                .into_iter()
                .map(|d| d.into_iter().map(|t| format!("w{t}")).collect())
                .collect();
            let m = fit(&docs, FeatureConfig { min_df: 1, ..Default::default() }).unwrap();
            for d in &docs {
                let v = m.transform(d);
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            for a in 0..m.n_features() {
                for b in 0..m.n_features() {
                    if m.space.df(a) < m.space.df(b) {
                        prop_assert!(m.idf[a] > m.idf[b]);
                    }
                }
                prop_assert!(m.idf[a] > 0.0);
            }
        }
    }
}
