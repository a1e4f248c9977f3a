//! Inference-time mitigation of added toxicity in machine translation.
//!
//! A translation is decoded without constraints and checked against a
//! target-language wordlist. When it is toxic but the source is not, the
//! toxic words are tokenized (with capitalization and punctuation variants,
//! optionally every segmentation) and decoding is repeated with those token
//! sequences banned from the beam.
//!
//! Modules, bottom-up: [`tokenizer`], [`toxicity`], [`model`], [`decoder`],
//! [`metrics`], [`pipeline`].

pub mod decoder;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tokenizer;
pub mod toxicity;

pub use decoder::{
    beam_search, beam_search_filtered, build_ban_set, BanOptions, BanSet, DecodeError, DecodeParams, Hypothesis,
};
pub use metrics::{bleu, BleuScore, BleuTokenizer, MetricsError};
pub use model::{Rule, Scorer, ToyModel};
pub use pipeline::{
    mintox, run_corpus, BanMode, CorpusEntry, CorpusReport, PipelineConfig, PipelineError, PipelineResult,
};
pub use tokenizer::{TokenId, TokenSeq, VocabError, Vocabulary};
pub use toxicity::{corpus_etox, EtoxRate, ToxicityReport, ToxicityWordlist};
