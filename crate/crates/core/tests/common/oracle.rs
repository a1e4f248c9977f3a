//! Exhaustive references for decoder tests. Nothing here goes through the
//! beam search or the ban trie.

use std::cmp::Ordering;

use mintox_core::model::Scorer;
use mintox_core::{Rule, TokenId, ToyModel, Vocabulary};
use rand::Rng;

/// Every finished sequence (BOS ... EOS) of at most `max_len` tokens with
/// its cumulative log-probability, accumulated left to right.
pub fn enumerate_finished<M: Scorer>(model: &M, source: &[TokenId], max_len: usize) -> Vec<(Vec<TokenId>, f64)> {
    let mut out = Vec::new();
    let mut stack = vec![(vec![model.bos()], 0.0f64)];
    while let Some((prefix, score)) = stack.pop() {
        let lp = model.score(source, &prefix);
        for (tok, &l) in lp.iter().enumerate() {
            if l == f64::NEG_INFINITY {
                continue;
            }
            let mut seq = prefix.clone();
            seq.push(tok as TokenId);
            let s = score + l;
            if tok as TokenId == model.eos() {
                out.push((seq, s));
            } else if seq.len() < max_len {
                stack.push((seq, s));
            }
        }
    }
    out
}

fn contains_run(hay: &[TokenId], needle: &[TokenId]) -> bool {
    needle.len() <= hay.len() && (0..=hay.len() - needle.len()).any(|i| &hay[i..i + needle.len()] == needle)
}

/// Best finished sequence whose generated part avoids every banned run.
/// Ties go to the shorter sequence, then the smaller token ids.
pub fn brute_force_best<M: Scorer>(
    model: &M,
    source: &[TokenId],
    max_len: usize,
    banned: &[Vec<TokenId>],
) -> Option<(Vec<TokenId>, f64)> {
    enumerate_finished(model, source, max_len)
        .into_iter()
        .filter(|(seq, _)| !banned.iter().any(|b| contains_run(&seq[1..], b)))
        .min_by(|(a, sa), (b, sb)| match sb.partial_cmp(sa).unwrap() {
            Ordering::Equal => a.len().cmp(&b.len()).then_with(|| a.cmp(b)),
            other => other,
        })
}

pub struct Instance {
    pub vocab: Vocabulary,
    pub model: ToyModel,
    pub source: Vec<TokenId>,
    pub max_len: usize,
    pub banned: Vec<Vec<TokenId>>,
}

/// A random rule-table model over at most `max_vocab` tokens (specials
/// included), with a random ban list avoiding BOS and EOS.
pub fn random_instance<R: Rng>(rng: &mut R, max_vocab: usize, max_len: usize) -> Instance {
    let plain = rng.gen_range(1..=max_vocab - 3);
    let surfaces: Vec<String> =
        (0..plain).map(|i| if i % 2 == 0 { format!("▁t{i}") } else { format!("t{i}") }).collect();
    let vocab = Vocabulary::load(&surfaces).unwrap();
    let all: Vec<String> = vocab.iter().map(|(_, s)| s.to_string()).collect();
    let ordinary: Vec<TokenId> =
        vocab.iter().map(|(id, _)| id).filter(|&id| id != vocab.bos() && id != vocab.eos()).collect();

    let n_rules = rng.gen_range(0..14);
    let mut rules = Vec::new();
    for _ in 0..n_rules {
        let target = &all[rng.gen_range(0..all.len())];
        let ctx_len = rng.gen_range(0..=2);
        let mut context: Vec<&str> = Vec::new();
        for j in 0..ctx_len {
            if j == 0 && rng.gen_bool(0.3) {
                context.push("<s>");
            } else {
                context.push(&all[ordinary[rng.gen_range(0..ordinary.len())] as usize]);
            }
        }
        rules.push(Rule::new(None, target, rng.gen_range(-4.0..4.0), &context));
    }
    let temperature = rng.gen_range(0.5..2.0);
    let model = ToyModel::new(&rules, &vocab, temperature).unwrap();

    let n_bans = rng.gen_range(1..=3);
    let banned = (0..n_bans)
        .map(|_| {
            let len = rng.gen_range(1..=3);
            (0..len).map(|_| ordinary[rng.gen_range(0..ordinary.len())]).collect()
        })
        .collect();
    Instance { vocab, model, source: Vec::new(), max_len, banned }
}

/// Beam wide enough to never drop a hypothesis.
pub fn exhaustive_beam(vocab_size: usize, max_len: usize) -> usize {
    vocab_size.pow(max_len as u32)
}
