//! A pinned, simplified Penn-Treebank-style tokenizer.
//!
//! The rules, applied to each whitespace-separated chunk of the lowercased
//! input:
//!
//! * leading characters from [`PUNCTUATION`] are emitted as their own tokens;
//! * trailing punctuation characters and the contraction suffixes
//!   `n't 's 're 've 'll 'd 'm` are peeled off from the right, repeatedly,
//!   for as long as a non-empty stem remains;
//! * the remaining stem is a token.
//!
//! Curly apostrophes are normalized to `'` first. Punctuation inside a word
//! (`3.5`, `u.s`) is left alone.

/// Characters split off as standalone tokens at word boundaries.
pub const PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')', '—'];

/// Contraction suffixes, checked longest-first.
const CONTRACTIONS: &[&str] = &["n't", "'ll", "'re", "'ve", "'s", "'d", "'m"];

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// Lowercase and split `text` into tokens.
///
/// ```
/// use lexsplit::corpus::tokenize;
/// assert_eq!(tokenize("Movie was AWFUL."), ["movie", "was", "awful", "."]);
/// assert_eq!(tokenize("don't"), ["do", "n't"]);
/// assert!(tokenize("").is_empty());
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let mut out = Vec::new();
    for chunk in normalized.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut rest = chunk;
    while let Some(c) = rest.chars().next() {
        if !is_punct(c) {
            break;
        }
        out.push(c.to_string());
        rest = &rest[c.len_utf8()..];
    }
    if rest.is_empty() {
        return;
    }

    let mut tail: Vec<&str> = Vec::new();
    loop {
        let last = rest.chars().next_back().expect("non-empty");
        if is_punct(last) {
            let cut = rest.len() - last.len_utf8();
            tail.push(&rest[cut..]);
            rest = &rest[..cut];
            // a fully-peeled chunk cannot be empty: leading punctuation is gone
            continue;
        }
        match CONTRACTIONS
            .iter()
            .find(|s| rest.len() > s.len() && rest.ends_with(*s))
        {
            Some(suffix) => {
                let cut = rest.len() - suffix.len();
                tail.push(&rest[cut..]);
                rest = &rest[..cut];
            }
            None => break,
        }
    }
    out.push(rest.to_string());
    out.extend(tail.into_iter().rev().map(str::to_string));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lowercases_and_splits_punctuation() {
        assert_eq!(tokenize("Movie was AWFUL."), ["movie", "was", "awful", "."]);
        assert_eq!(
            tokenize("(Great, really!)"),
            ["(", "great", ",", "really", "!", ")"]
        );
    }

    #[test]
    fn contractions() {
        assert_eq!(tokenize("don't"), ["do", "n't"]);
        assert_eq!(tokenize("I'm sure they'll"), ["i", "'m", "sure", "they", "'ll"]);
        assert_eq!(tokenize("we're we've he'd it's"), ["we", "'re", "we", "'ve", "he", "'d", "it", "'s"]);
        assert_eq!(tokenize("Don’t."), ["do", "n't", "."]);
        // a bare suffix is a token of its own
        assert_eq!(tokenize("n't 's"), ["n't", "'s"]);
    }

    #[test]
    fn inner_punctuation_kept() {
        assert_eq!(tokenize("rated 3.5 stars"), ["rated", "3.5", "stars"]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn punctuation_runs() {
        assert_eq!(tokenize("wow!!"), ["wow", "!", "!"]);
        assert_eq!(tokenize("a.'s"), ["a", ".", "'s"]);
        assert_eq!(tokenize("...")[..], [".", ".", "."]);
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(s in "[a-zA-Z.,!?;:\"()'’ —-]{0,60}") {
            let first = tokenize(&s);
            let again = tokenize(&first.join(" "));
            prop_assert_eq!(first, again);
        }
    }
}
