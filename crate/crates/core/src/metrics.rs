//! Corpus BLEU with mteval-13a or character tokenization and exponential
//! smoothing, single reference, no effective-order reduction.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

const MAX_ORDER: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BleuTokenizer {
    #[default]
    #[serde(rename = "13a")]
    Mteval13a,
    Char,
}

impl BleuTokenizer {
    pub fn name(&self) -> &'static str {
        match self {
            BleuTokenizer::Mteval13a => "13a",
            BleuTokenizer::Char => "char",
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self {
            BleuTokenizer::Mteval13a => tokenize_13a(text),
            BleuTokenizer::Char => tokenize_char(text),
        }
    }

    pub fn signature(&self) -> String {
        format!("nrefs:1|case:mixed|eff:no|tok:{}|smooth:exp", self.name())
    }
}

impl std::str::FromStr for BleuTokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "13a" => Ok(BleuTokenizer::Mteval13a),
            "char" => Ok(BleuTokenizer::Char),
            other => Err(format!("unknown BLEU tokenizer {other:?}, expected 13a or char")),
        }
    }
}

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").expect("valid regex"));
static PERIOD_COMMA_AFTER_NON_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([^0-9])([\.,])").expect("valid regex"));
static PERIOD_COMMA_BEFORE_NON_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\.,])([^0-9])").expect("valid regex"));
static DASH_AFTER_DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9])(-)").expect("valid regex"));

/// Whitespace as understood by Python's `str.split()`.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// mteval-v13a tokenization. Case is preserved.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line.replace("&quot;", "\"").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">");
    }
    let line = format!(" {line} ");
    let line = PUNCT.replace_all(&line, " $1 ");
    let line = PERIOD_COMMA_AFTER_NON_DIGIT.replace_all(&line, "$1 $2 ");
    let line = PERIOD_COMMA_BEFORE_NON_DIGIT.replace_all(&line, " $1 $2");
    let line = DASH_AFTER_DIGIT.replace_all(&line, "$1 $2 ");
    line.split(is_py_space).filter(|w| !w.is_empty()).map(str::to_string).collect()
}

/// One token per non-whitespace character.
pub fn tokenize_char(text: &str) -> Vec<String> {
    text.chars().filter(|c| !is_py_space(*c)).map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    /// 0 to 100.
    pub score: f64,
    /// Smoothed n-gram precisions as fractions, orders 1 to 4.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_length: usize,
    pub ref_length: usize,
    pub correct: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
    pub signature: String,
}

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-4 over aligned hypothesis/reference pairs.
pub fn bleu<H, R>(hypotheses: &[H], references: &[R], tokenizer: BleuTokenizer) -> Result<BleuScore, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch { hyps: hypotheses.len(), refs: references.len() });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut correct = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let mut hyp_length = 0;
    let mut ref_length = 0;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp = tokenizer.tokenize(hyp.as_ref());
        let reference = tokenizer.tokenize(reference.as_ref());
        hyp_length += hyp.len();
        ref_length += reference.len();
        for order in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(&reference, order);
            for (gram, count) in ngram_counts(&hyp, order) {
                correct[order - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                total[order - 1] += count;
            }
        }
    }
    Ok(score_from_stats(correct, total, hyp_length, ref_length, tokenizer))
}

fn score_from_stats(
    correct: [usize; MAX_ORDER],
    total: [usize; MAX_ORDER],
    hyp_length: usize,
    ref_length: usize,
    tokenizer: BleuTokenizer,
) -> BleuScore {
    let brevity_penalty = if hyp_length >= ref_length {
        1.0
    } else if hyp_length > 0 {
        (1.0 - ref_length as f64 / hyp_length as f64).exp()
    } else {
        0.0
    };
    let mut precisions = [0.0; MAX_ORDER];
    let mut score = 0.0;
    // no matching n-gram of any order scores zero outright
    if correct.iter().any(|&c| c > 0) {
        let mut smoothing = 1.0;
        for n in 0..MAX_ORDER {
            if total[n] == 0 {
                break;
            }
            precisions[n] = if correct[n] == 0 {
                smoothing *= 2.0;
                1.0 / (smoothing * total[n] as f64)
            } else {
                correct[n] as f64 / total[n] as f64
            };
        }
        let mean_log = precisions.iter().map(|&p| safe_ln(p)).sum::<f64>() / MAX_ORDER as f64;
        score = 100.0 * brevity_penalty * mean_log.exp();
    }
    BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_length,
        ref_length,
        correct,
        total,
        signature: tokenizer.signature(),
    }
}

fn safe_ln(p: f64) -> f64 {
    if p == 0.0 {
        -9_999_999_999.0
    } else {
        p.ln()
    }
}
