use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Default vocabulary cap (most frequent words kept for model training).
pub const DEFAULT_MAX_VOCAB: usize = 80_000;

/// Literal token written for anonymized keyword positions.
pub const ANON_TOKEN: &str = "ANON";
pub const UNK_TOKEN: &str = "<unk>";
pub const DROP_TOKEN: &str = "<drop>";

/// Dense token ids with three reserved specials at the front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub const UNK: u32 = 0;
    pub const ANON: u32 = 1;
    pub const DROP: u32 = 2;
    const SPECIALS: usize = 3;

    /// Keep the `max_size - 3` most frequent tokens (ties broken
    /// lexicographically) after the UNK/ANON/DROP specials.
    ///
    /// The literal `ANON` token maps onto the reserved ANON id and is not
    /// counted as an ordinary word.
    pub fn build<'a, I>(docs: I, max_size: usize) -> crate::Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if max_size < 4 {
            return Err(crate::Error::invalid(format!(
                "vocabulary max_size must be >= 4, got {max_size}"
            )));
        }
        let mut counts: HashMap<&'a str, u64> = HashMap::new();
        for doc in docs {
            for tok in doc {
                if tok != ANON_TOKEN {
                    *counts.entry(tok.as_str()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - Self::SPECIALS);

        let tokens = [UNK_TOKEN, ANON_TOKEN, DROP_TOKEN]
            .into_iter()
            .chain(ranked.into_iter().map(|(t, _)| t))
            .map(str::to_string)
            .collect();
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < Self::SPECIALS
    }
}
