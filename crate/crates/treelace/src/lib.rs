//! A toolkit for lexicalized transition-based dependency parsing across
//! languages: treebanks in several languages are harmonized, merged and
//! fed to one parser, which then parses any of the languages it saw, and
//! with a companion tagger handles text that switches language
//! mid-sentence.
//!
//! The pieces, bottom to top:
//!
//! - [`conll`]: reading and writing the ten-column CoNLL dependency
//!   format, with strict validation and canonical output.
//! - [`treebank`]: merging corpora, tag harmonization (universal tags,
//!   language prefixing), shared-tag analysis, projectivization.
//! - [`transition`]: arc-eager and arc-standard transition systems with
//!   static oracles.
//! - [`features`]: feature templates over parser configurations, string
//!   interning, the default and candidate template sets.
//! - [`learner`]: the averaged perceptron and its flat-text model format.
//! - [`parser`]: training greedy parsers and parsing with them.
//! - [`tagger`]: an averaged-perceptron part-of-speech tagger and the
//!   tag-then-parse pipeline.
//! - [`eval`]: attachment scores, paired randomization significance
//!   tests, Benjamini-Hochberg correction, and the cross-lingual
//!   experiment grid.
//! - [`optimizer`]: three-phase automatic configuration (data profile,
//!   algorithm selection, greedy feature search).
//! - [`synth`]: two small synthetic languages with adversarially
//!   overlapping word shapes, for experiments and tests.
//! - [`cli`]: the command-line workflow with reproducible run manifests.
//!
//! Everything is deterministic: training, searching and sampling are
//! driven by explicit seeds, and every artifact can be reproduced byte
//! for byte from its run manifest.
//!
//! The `examples/` directory shows one runnable program per capability;
//! start with `train_and_parse`.

pub mod cli;
pub mod conll;
pub mod error;
pub mod eval;
pub mod features;
pub mod learner;
pub mod optimizer;
pub mod parser;
pub mod synth;
pub mod tagger;
pub mod transition;
pub mod treebank;

pub use conll::{read_treebank, read_treebank_with, write_treebank, Sentence, Token, Treebank};
pub use error::{Error, Result};
pub use eval::{benjamini_hochberg, randomized_comparator, score, EvalReport, Metric};
pub use parser::{train_parser, ParserModel, TrainParams};
pub use tagger::{tag_and_parse, train_tagger, TaggerModel, TaggerParams};
pub use transition::TransitionSystem;
pub use treebank::{apply_tag_config, merge_treebanks, projectivize, TagConfig, TagMode};
