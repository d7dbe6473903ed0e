//! Lexicon-disjoint train/test splits for text classification.

mod error;

pub mod adadrop;
pub mod anonymize;
pub mod baselines;
pub mod corpus;
pub mod features;
pub mod harness;
pub mod lexicon;
pub mod neural;
pub mod phrase;
pub mod split_graph;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub struct BookIntroduction;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/corpus.md")]
pub struct BookCorpus;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lexicons.md")]
pub struct BookLexicons;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lexicon-split.md")]
pub struct BookLexiconSplit;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/anonymize.md")]
pub struct BookAnonymize;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/neural.md")]
pub struct BookNeural;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/adadrop.md")]
pub struct BookAdadrop;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/synth.md")]
pub struct BookSynth;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
pub struct BookExperiments;
