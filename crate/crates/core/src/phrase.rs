//! Exact contiguous phrase matching over token sequences.

use std::collections::HashMap;

/// A match of phrase `phrase` covering `tokens[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseMatch {
    pub start: usize,
    pub len: usize,
    pub phrase: usize,
}

/// Looks up space-joined phrases inside token lists.
///
/// Phrase indices refer to positions in the slice given to [`PhraseMatcher::new`];
/// a repeated phrase keeps its first index.
#[derive(Debug, Clone, Default)]
pub struct PhraseMatcher {
    map: HashMap<Vec<String>, usize>,
    lengths: Vec<usize>,
}

impl PhraseMatcher {
    pub fn new<S: AsRef<str>>(phrases: &[S]) -> Self {
        let mut map = HashMap::with_capacity(phrases.len());
        for (i, p) in phrases.iter().enumerate() {
            let toks: Vec<String> = p.as_ref().split_whitespace().map(str::to_string).collect();
            if !toks.is_empty() {
                map.entry(toks).or_insert(i);
            }
        }
        let mut lengths: Vec<usize> = map.keys().map(Vec::len).collect();
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths.dedup();
        PhraseMatcher { map, lengths }
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Every occurrence, overlapping ones included, ordered by start then length.
    pub fn occurrences(&self, tokens: &[String]) -> Vec<PhraseMatch> {
        let mut out = Vec::new();
        for start in 0..tokens.len() {
            for &len in self.lengths.iter().rev() {
                if start + len > tokens.len() {
                    break;
                }
                if let Some(&phrase) = self.map.get(&tokens[start..start + len]) {
                    out.push(PhraseMatch { start, len, phrase });
                }
            }
        }
        out
    }

    /// Distinct phrase indices occurring in `tokens`, sorted.
    pub fn contained(&self, tokens: &[String]) -> Vec<usize> {
        let mut out: Vec<usize> = self.occurrences(tokens).into_iter().map(|m| m.phrase).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Left-to-right scan taking the longest phrase at each position and
    /// skipping past it, so matches never overlap.
    pub fn leftmost_longest(&self, tokens: &[String]) -> Vec<PhraseMatch> {
        let mut out = Vec::new();
        let mut start = 0;
        'scan: while start < tokens.len() {
            for &len in &self.lengths {
                if start + len <= tokens.len() {
                    if let Some(&phrase) = self.map.get(&tokens[start..start + len]) {
                        out.push(PhraseMatch { start, len, phrase });
                        start += len;
                        continue 'scan;
                    }
                }
            }
            start += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn contiguity() {
        let m = PhraseMatcher::new(&["a b"]);
        assert_eq!(m.contained(&toks("x a b y")), [0]);
        assert!(m.contained(&toks("a x b")).is_empty());
    }

    #[test]
    fn overlapping_occurrences() {
        let m = PhraseMatcher::new(&["a b", "b c", "b"]);
        let occ = m.occurrences(&toks("a b c"));
        assert_eq!(occ.len(), 3);
        let ll = m.leftmost_longest(&toks("a b c"));
        assert_eq!(ll, [PhraseMatch { start: 0, len: 2, phrase: 0 }]);
    }

    #[test]
    fn longest_wins() {
        let m = PhraseMatcher::new(&["great", "great movie"]);
        let ll = m.leftmost_longest(&toks("a great movie great"));
        assert_eq!(
            ll,
            [
                PhraseMatch { start: 1, len: 2, phrase: 1 },
                PhraseMatch { start: 3, len: 1, phrase: 0 }
            ]
        );
    }
}
