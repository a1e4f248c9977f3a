//! Beam search with banned token sequences.
//!
//! A [`BanSet`] is a trie of token sequences. While decoding, any next token
//! that would complete a banned sequence, given the tokens already in the
//! hypothesis, gets a score of negative infinity before the top candidates
//! are chosen. No hypothesis is ever dropped after the fact, so the beam
//! stays full, and no returned sequence contains a banned run.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::Scorer;
use crate::tokenizer::{TokenId, TokenSeq, Vocabulary, DEFAULT_SEGMENTATION_CAP};
use crate::toxicity::normalize;

/// Prefixes tried in front of every banned word.
pub const PUNCTUATION_PREFIXES: [char; 6] = ['*', '"', '\'', '(', '¡', '¿'];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DecodeError {
    #[error("no banned sequence survived tokenization")]
    EmptyBanSet,
    #[error("beam size must be at least 1")]
    InvalidBeamSize,
    #[error("max length must be at least 2, got {0}")]
    InvalidMaxLength(usize),
    #[error("every continuation was banned before any hypothesis finished")]
    Exhausted,
    #[error("scorer returned {got} scores for a vocabulary of {expected}")]
    ScoreLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: BTreeMap<TokenId, usize>,
    terminal: bool,
}

/// Trie of banned token sequences.
#[derive(Debug, Clone)]
pub struct BanSet {
    nodes: Vec<Node>,
    sequences: BTreeSet<TokenSeq>,
    forbidden: Vec<TokenId>,
    rejected: Vec<TokenSeq>,
    depth: usize,
}

impl BanSet {
    /// An empty set that refuses sequences containing any of `forbidden`
    /// (normally BOS and EOS).
    pub fn new(forbidden: &[TokenId]) -> Self {
        BanSet {
            nodes: vec![Node::default()],
            sequences: BTreeSet::new(),
            forbidden: forbidden.to_vec(),
            rejected: Vec::new(),
            depth: 0,
        }
    }

    pub fn for_vocab(vocab: &Vocabulary) -> Self {
        Self::new(&[vocab.bos(), vocab.eos()])
    }

    /// Adds `seq`. Empty sequences are ignored; sequences with a forbidden
    /// token are recorded in [`BanSet::rejected`]. Returns true if the set
    /// grew.
    pub fn insert(&mut self, seq: &[TokenId]) -> bool {
        if seq.is_empty() {
            return false;
        }
        if seq.iter().any(|t| self.forbidden.contains(t)) {
            let seq = TokenSeq::from(seq.to_vec());
            if !self.rejected.contains(&seq) {
                self.rejected.push(seq);
            }
            return false;
        }
        let mut node = 0;
        for &tok in seq {
            node = match self.nodes[node].children.get(&tok) {
                Some(&next) => next,
                None => {
                    self.nodes.push(Node::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(tok, next);
                    next
                }
            };
        }
        let fresh = !self.nodes[node].terminal;
        self.nodes[node].terminal = true;
        if fresh {
            self.sequences.insert(seq.to_vec().into());
            self.depth = self.depth.max(seq.len());
        }
        fresh
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn contains(&self, seq: &[TokenId]) -> bool {
        self.sequences.contains(&TokenSeq::from(seq.to_vec()))
    }

    /// Banned sequences in sorted order.
    pub fn sequences(&self) -> impl Iterator<Item = &TokenSeq> {
        self.sequences.iter()
    }

    /// Sequences refused because they contained a forbidden token.
    pub fn rejected(&self) -> &[TokenSeq] {
        &self.rejected
    }

    /// Tokens that would complete a banned sequence if appended to
    /// `generated`. Sorted, without duplicates.
    pub fn banned_next(&self, generated: &[TokenId]) -> Vec<TokenId> {
        let mut out = BTreeSet::new();
        let window = self.depth.saturating_sub(1).min(generated.len());
        for start in generated.len() - window..=generated.len() {
            let mut node = 0;
            let mut alive = true;
            for tok in &generated[start..] {
                match self.nodes[node].children.get(tok) {
                    Some(&next) => node = next,
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive {
                for (&tok, &child) in &self.nodes[node].children {
                    if self.nodes[child].terminal {
                        out.insert(tok);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// True if any banned sequence occurs as a contiguous run of `tokens`.
    pub fn occurs_in(&self, tokens: &[TokenId]) -> bool {
        (0..tokens.len()).any(|end| self.banned_next(&tokens[..end]).contains(&tokens[end]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BanOptions {
    pub capitalization_variants: bool,
    pub all_segmentations: bool,
    /// Segmentations kept per word when `all_segmentations` is on.
    pub segmentation_cap: usize,
}

impl Default for BanOptions {
    fn default() -> Self {
        BanOptions {
            capitalization_variants: true,
            all_segmentations: false,
            segmentation_cap: DEFAULT_SEGMENTATION_CAP,
        }
    }
}

fn capitalize_first(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Surface forms banned for one word or phrase, deduplicated, in a fixed
/// order.
pub fn surface_variants(word: &str, capitalization_variants: bool) -> Vec<String> {
    let word = word.split_whitespace().collect::<Vec<_>>().join(" ");
    if word.is_empty() {
        return Vec::new();
    }
    let mut bases = vec![word.clone()];
    if capitalization_variants {
        let folded = normalize(&word);
        bases.push(capitalize_first(&folded));
        bases.push(folded.clone());
        bases.push(word.to_uppercase());
    }
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    for base in &bases {
        push(base.clone());
    }
    for base in &bases {
        for p in PUNCTUATION_PREFIXES {
            push(format!("{p}{base}"));
        }
    }
    out
}

fn phrase_sequences(phrase: &str, vocab: &Vocabulary, opts: &BanOptions) -> Vec<TokenSeq> {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    if !opts.all_segmentations {
        return vec![vocab.tokenize(phrase)];
    }
    let cap = opts.segmentation_cap.max(1);
    let mut acc: Vec<Vec<TokenId>> = vec![Vec::new()];
    for word in words {
        let segs = vocab.enumerate_segmentations(word, cap).seqs;
        let mut next = Vec::new();
        'outer: for prefix in &acc {
            for seg in &segs {
                if next.len() == cap {
                    break 'outer;
                }
                let mut joined = prefix.clone();
                joined.extend_from_slice(seg);
                next.push(joined);
            }
        }
        acc = next;
    }
    // the canonical tokenization of the whole phrase is always banned
    let canonical = vocab.tokenize(phrase);
    let mut out: Vec<TokenSeq> = acc.into_iter().map(TokenSeq::from).collect();
    if !out.contains(&canonical) {
        out.push(canonical);
    }
    out
}

/// Tokenizes every surface variant of `words` and collects the results in a
/// trie.
pub fn build_ban_set<S: AsRef<str>>(words: &[S], vocab: &Vocabulary, opts: &BanOptions) -> Result<BanSet, DecodeError> {
    let mut ban = BanSet::for_vocab(vocab);
    for word in words {
        for variant in surface_variants(word.as_ref(), opts.capitalization_variants) {
            for seq in phrase_sequences(&variant, vocab, opts) {
                ban.insert(&seq);
            }
        }
    }
    if ban.is_empty() {
        return Err(DecodeError::EmptyBanSet);
    }
    Ok(ban)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodeParams {
    pub beam_size: usize,
    /// Total hypothesis length including BOS and EOS. `None` means
    /// `2 * source_len + 16`.
    pub max_length: Option<usize>,
    /// When set, finished hypotheses are ranked by `score / generated_len^alpha`.
    pub length_penalty: Option<f64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { beam_size: 5, max_length: None, length_penalty: None }
    }
}

impl DecodeParams {
    pub fn with_beam(beam_size: usize) -> Self {
        DecodeParams { beam_size, ..Self::default() }
    }

    pub fn max_length_for(&self, source_len: usize) -> usize {
        self.max_length.unwrap_or(2 * source_len + 16)
    }

    fn validate(&self, source_len: usize) -> Result<usize, DecodeError> {
        if self.beam_size == 0 {
            return Err(DecodeError::InvalidBeamSize);
        }
        let max_len = self.max_length_for(source_len);
        if max_len < 2 {
            return Err(DecodeError::InvalidMaxLength(max_len));
        }
        Ok(max_len)
    }
}

/// A decoded sequence starting with BOS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub tokens: TokenSeq,
    /// Sum of the per-step log-probabilities of `tokens[1..]`.
    pub score: f64,
    /// Ends with EOS. An unfinished result hit the length limit.
    pub finished: bool,
}

impl Hypothesis {
    pub fn is_truncated(&self) -> bool {
        !self.finished
    }

    /// Tokens between BOS and EOS.
    pub fn body(&self) -> &[TokenId] {
        let end = if self.finished { self.tokens.len() - 1 } else { self.tokens.len() };
        &self.tokens[1.min(end)..end]
    }

    fn ranking_score(&self, length_penalty: Option<f64>) -> f64 {
        match length_penalty {
            None => self.score,
            Some(alpha) => self.score / ((self.tokens.len() - 1).max(1) as f64).powf(alpha),
        }
    }
}

/// Higher score first, then shorter, then smaller token ids.
pub fn rank(a_score: f64, a: &[TokenId], b_score: f64, b: &[TokenId]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a.len().cmp(&b.len())).then_with(|| a.cmp(b))
}

fn best_of(pool: Vec<Hypothesis>, length_penalty: Option<f64>) -> Option<Hypothesis> {
    pool.into_iter()
        .min_by(|a, b| rank(a.ranking_score(length_penalty), &a.tokens, b.ranking_score(length_penalty), &b.tokens))
}

/// Plain beam search.
pub fn beam_search<M: Scorer + ?Sized>(
    model: &M,
    source: &[TokenId],
    params: &DecodeParams,
) -> Result<Hypothesis, DecodeError> {
    search(model, source, None, params)
}

/// Beam search that never completes a sequence from `ban`.
pub fn beam_search_filtered<M: Scorer + ?Sized>(
    model: &M,
    source: &[TokenId],
    ban: &BanSet,
    params: &DecodeParams,
) -> Result<Hypothesis, DecodeError> {
    search(model, source, Some(ban), params)
}

struct Candidate {
    parent: usize,
    token: TokenId,
    score: f64,
}

fn search<M: Scorer + ?Sized>(
    model: &M,
    source: &[TokenId],
    ban: Option<&BanSet>,
    params: &DecodeParams,
) -> Result<Hypothesis, DecodeError> {
    let max_len = params.validate(source.len())?;
    let beam = params.beam_size;
    let eos = model.eos();
    let mut live = vec![Hypothesis { tokens: vec![model.bos()].into(), score: 0.0, finished: false }];
    let mut completed: Vec<Hypothesis> = Vec::new();
    let mut cut_off: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() {
        if params.length_penalty.is_none() {
            // log-probs are non-positive: extending a live hypothesis can
            // only lower or keep its score, and a tie loses on length
            let best_done = completed.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
            let best_live = live.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
            if !completed.is_empty() && best_done >= best_live {
                break;
            }
        }

        let mut candidates = Vec::new();
        for (parent, hyp) in live.iter().enumerate() {
            let mut scores = model.score(source, &hyp.tokens);
            if scores.len() != model.vocab_size() {
                return Err(DecodeError::ScoreLength { expected: model.vocab_size(), got: scores.len() });
            }
            if let Some(ban) = ban {
                for tok in ban.banned_next(&hyp.tokens[1..]) {
                    if let Some(s) = scores.get_mut(tok as usize) {
                        *s = f64::NEG_INFINITY;
                    }
                }
            }
            for (token, &lp) in scores.iter().enumerate() {
                if lp > f64::NEG_INFINITY {
                    candidates.push(Candidate { parent, token: token as TokenId, score: hyp.score + lp });
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let keep = (2 * beam).min(candidates.len());
        let order = |a: &Candidate, b: &Candidate| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| live[a.parent].tokens.cmp(&live[b.parent].tokens))
                .then_with(|| a.token.cmp(&b.token))
        };
        candidates.select_nth_unstable_by(keep - 1, order);
        candidates.truncate(keep);
        candidates.sort_by(order);

        let mut next = Vec::with_capacity(beam);
        for (rank, cand) in candidates.into_iter().enumerate() {
            let mut tokens = live[cand.parent].tokens.clone();
            tokens.push(cand.token);
            if cand.token == eos {
                // as in common implementations, EOS only counts within the top `beam`
                if rank < beam {
                    completed.push(Hypothesis { tokens, score: cand.score, finished: true });
                }
            } else if tokens.len() >= max_len {
                cut_off.push(Hypothesis { tokens, score: cand.score, finished: false });
            } else if next.len() < beam {
                next.push(Hypothesis { tokens, score: cand.score, finished: false });
            }
            if next.len() == beam && rank + 1 >= beam {
                break;
            }
        }
        live = next;
    }

    if let Some(best) = best_of(completed, params.length_penalty) {
        return Ok(best);
    }
    best_of(cut_off, params.length_penalty).ok_or(DecodeError::Exhausted)
}
