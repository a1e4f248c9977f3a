//! Detect added toxicity and regenerate with the offending words banned.
//!
//! Per sentence: decode without constraints; if the output is clean, keep
//! it. Otherwise classify the source, and only when the source is clean,
//! ban the detected words (or the whole target wordlist) and decode again.
//! Sentences whose source is already toxic are left untouched, including
//! ones where the output is more toxic than the input.

use serde::Serialize;

use rayon::prelude::*;

use crate::decoder::{self, BanOptions, BanSet, DecodeError, DecodeParams, Hypothesis};
use crate::metrics::{self, BleuScore, BleuTokenizer, MetricsError};
use crate::model::Scorer;
use crate::tokenizer::{VocabError, Vocabulary, DEFAULT_SEGMENTATION_CAP};
use crate::toxicity::{corpus_etox, EtoxRate, ToxicityError, ToxicityReport, ToxicityWordlist};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error("source text is empty")]
    EmptySource,
    #[error("max rounds must be at least 1")]
    InvalidRounds,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Toxicity(#[from] ToxicityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BanMode {
    /// Ban only the entries found in the output.
    #[default]
    DetectedWords,
    /// Ban every entry of the target wordlist.
    FullWordlist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub ban_mode: BanMode,
    /// Filtered decodes allowed per sentence; later rounds add newly
    /// detected words to the ban list.
    pub max_rounds: usize,
    pub all_segmentations: bool,
    pub capitalization_variants: bool,
    pub segmentation_cap: usize,
    pub decode: DecodeParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ban_mode: BanMode::DetectedWords,
            max_rounds: 1,
            all_segmentations: false,
            capitalization_variants: true,
            segmentation_cap: DEFAULT_SEGMENTATION_CAP,
            decode: DecodeParams::default(),
        }
    }
}

impl PipelineConfig {
    fn ban_options(&self) -> BanOptions {
        BanOptions {
            capitalization_variants: self.capitalization_variants,
            all_segmentations: self.all_segmentations,
            segmentation_cap: self.segmentation_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub final_text: String,
    pub unconstrained_text: String,
    pub final_hypothesis: Hypothesis,
    pub unconstrained_hypothesis: Hypothesis,
    pub mitigation_applied: bool,
    /// Filtered decodes performed.
    pub rounds_used: usize,
    /// Only computed when the unconstrained output is toxic.
    pub input_report: Option<ToxicityReport>,
    pub output_report_before: ToxicityReport,
    pub output_report_after: ToxicityReport,
    pub banned_words: Vec<String>,
    pub ban_sequences: usize,
    pub decode_calls: usize,
    /// The ban list tokenized to nothing; the unconstrained output was kept.
    pub empty_ban_set: bool,
}

/// Runs the detect-and-regenerate procedure on one source sentence.
pub fn mintox<M: Scorer + ?Sized>(
    model: &M,
    vocab: &Vocabulary,
    src_wordlist: &ToxicityWordlist,
    tgt_wordlist: &ToxicityWordlist,
    source_text: &str,
    config: &PipelineConfig,
) -> Result<PipelineResult, PipelineError> {
    if config.max_rounds == 0 {
        return Err(PipelineError::InvalidRounds);
    }
    if source_text.trim().is_empty() {
        return Err(PipelineError::EmptySource);
    }
    let source = vocab.tokenize(source_text);
    let first = decoder::beam_search(model, &source, &config.decode)?;
    let first_text = vocab.detokenize(&first.tokens)?;
    let before = tgt_wordlist.classify(&first_text);

    let mut result = PipelineResult {
        final_text: first_text.clone(),
        unconstrained_text: first_text,
        final_hypothesis: first.clone(),
        unconstrained_hypothesis: first,
        mitigation_applied: false,
        rounds_used: 0,
        input_report: None,
        output_report_before: before.clone(),
        output_report_after: before,
        banned_words: Vec::new(),
        ban_sequences: 0,
        decode_calls: 1,
        empty_ban_set: false,
    };
    if !result.output_report_before.is_toxic {
        return Ok(result);
    }
    let input = src_wordlist.classify(source_text);
    let input_toxic = input.is_toxic;
    result.input_report = Some(input);
    if input_toxic {
        return Ok(result);
    }

    let mut words: Vec<String> = match config.ban_mode {
        BanMode::DetectedWords => result.output_report_before.matched_entries(),
        BanMode::FullWordlist => tgt_wordlist.entries().map(str::to_string).collect(),
    };
    let opts = config.ban_options();
    let mut ban: BanSet = match decoder::build_ban_set(&words, vocab, &opts) {
        Ok(ban) => ban,
        Err(DecodeError::EmptyBanSet) => {
            result.empty_ban_set = true;
            return Ok(result);
        }
        Err(e) => return Err(e.into()),
    };

    loop {
        let hyp = decoder::beam_search_filtered(model, &source, &ban, &config.decode)?;
        result.decode_calls += 1;
        result.rounds_used += 1;
        result.mitigation_applied = true;
        result.final_text = vocab.detokenize(&hyp.tokens)?;
        result.final_hypothesis = hyp;
        result.output_report_after = tgt_wordlist.classify(&result.final_text);
        result.ban_sequences = ban.len();

        if result.rounds_used >= config.max_rounds || !result.output_report_after.is_toxic {
            break;
        }
        let fresh: Vec<String> =
            result.output_report_after.matched_entries().into_iter().filter(|w| !words.contains(w)).collect();
        if fresh.is_empty() {
            // the same words resurfaced through segmentations the ban set lacks
            break;
        }
        if let Ok(extra) = decoder::build_ban_set(&fresh, vocab, &opts) {
            for seq in extra.sequences() {
                ban.insert(seq);
            }
        }
        words.extend(fresh);
    }
    result.banned_words = words;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Deserialize, Serialize)]
pub struct CorpusEntry {
    pub id: String,
    pub src: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// Per-sentence record of a mitigated sentence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceDiff {
    pub id: String,
    pub banned_words: Vec<String>,
    pub before: String,
    pub after: String,
    pub still_toxic: bool,
    pub rounds_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub sentences: usize,
    pub etox_before: EtoxRate,
    pub etox_after: EtoxRate,
    /// Over the sentences that carry a reference; absent if none do.
    pub bleu_before: Option<BleuScore>,
    pub bleu_after: Option<BleuScore>,
    pub mitigation_count: usize,
    pub skipped_toxic_input: usize,
    pub empty_ban_set_count: usize,
    pub decode_calls: usize,
    /// Mean log-probability of the chosen hypotheses.
    pub mean_logprob_before: f64,
    pub mean_logprob_after: f64,
    pub diffs: Vec<SentenceDiff>,
    #[serde(skip)]
    pub results: Vec<PipelineResult>,
}

/// Runs [`mintox`] on every sentence on the current rayon pool and
/// aggregates. Output order follows input order.
pub fn run_corpus<M: Scorer + ?Sized>(
    model: &M,
    vocab: &Vocabulary,
    src_wordlist: &ToxicityWordlist,
    tgt_wordlist: &ToxicityWordlist,
    corpus: &[CorpusEntry],
    config: &PipelineConfig,
    bleu_tokenizer: BleuTokenizer,
) -> Result<CorpusReport, PipelineError> {
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let results = corpus
        .par_iter()
        .map(|entry| mintox(model, vocab, src_wordlist, tgt_wordlist, &entry.src, config))
        .collect::<Result<Vec<_>, _>>()?;

    let etox_before = corpus_etox(results.iter().map(|r| &r.output_report_before))?;
    let etox_after = corpus_etox(results.iter().map(|r| &r.output_report_after))?;

    let with_ref: Vec<(&str, &PipelineResult)> = corpus
        .iter()
        .zip(&results)
        .filter_map(|(e, r)| e.reference.as_deref().map(|reference| (reference, r)))
        .collect();
    let (bleu_before, bleu_after) = if with_ref.is_empty() {
        (None, None)
    } else {
        let refs: Vec<&str> = with_ref.iter().map(|(reference, _)| *reference).collect();
        let before: Vec<&str> = with_ref.iter().map(|(_, r)| r.unconstrained_text.as_str()).collect();
        let after: Vec<&str> = with_ref.iter().map(|(_, r)| r.final_text.as_str()).collect();
        (Some(metrics::bleu(&before, &refs, bleu_tokenizer)?), Some(metrics::bleu(&after, &refs, bleu_tokenizer)?))
    };

    let n = results.len() as f64;
    let diffs = corpus
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.mitigation_applied)
        .map(|(e, r)| SentenceDiff {
            id: e.id.clone(),
            banned_words: r.banned_words.clone(),
            before: r.unconstrained_text.clone(),
            after: r.final_text.clone(),
            still_toxic: r.output_report_after.is_toxic,
            rounds_used: r.rounds_used,
        })
        .collect();

    Ok(CorpusReport {
        sentences: results.len(),
        etox_before,
        etox_after,
        bleu_before,
        bleu_after,
        mitigation_count: results.iter().filter(|r| r.mitigation_applied).count(),
        skipped_toxic_input: results.iter().filter(|r| r.input_report.as_ref().is_some_and(|i| i.is_toxic)).count(),
        empty_ban_set_count: results.iter().filter(|r| r.empty_ban_set).count(),
        decode_calls: results.iter().map(|r| r.decode_calls).sum(),
        mean_logprob_before: results.iter().map(|r| r.unconstrained_hypothesis.score).sum::<f64>() / n,
        mean_logprob_after: results.iter().map(|r| r.final_hypothesis.score).sum::<f64>() / n,
        diffs,
        results,
    })
}
