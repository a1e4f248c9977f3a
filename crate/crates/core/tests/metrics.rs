mod common;

use mintox_core::{bleu, BleuTokenizer};
use proptest::prelude::*;
use serde_json::Value;

const TOL: f64 = 1e-4;

fn pairs() -> (Vec<String>, Vec<String>) {
    common::read_fixture("bleu_pairs.tsv")
        .lines()
        .map(|l| {
            let (h, r) = l.split_once('\t').unwrap();
            (h.to_string(), r.to_string())
        })
        .unzip()
}

/// Values produced by `bleu_oracle.py` with sacrebleu 2.3.1.
fn expected() -> Value {
    serde_json::from_str(&common::read_fixture("bleu_expected.json")).unwrap()
}

fn check_against_reference(tok: BleuTokenizer) {
    let (hyps, refs) = pairs();
    let want = &expected()[tok.name()];
    let got = bleu(&hyps, &refs, tok).unwrap();
    assert!((got.score - want["corpus"].as_f64().unwrap()).abs() < TOL, "{} vs {}", got.score, want["corpus"]);
    assert!((got.brevity_penalty - want["bp"].as_f64().unwrap()).abs() < TOL);
    for (p, w) in got.precisions.iter().zip(want["precisions"].as_array().unwrap()) {
        assert!((100.0 * p - w.as_f64().unwrap()).abs() < TOL);
    }
    for (i, w) in want["sentences"].as_array().unwrap().iter().enumerate() {
        let s = bleu(&hyps[i..=i], &refs[i..=i], tok).unwrap();
        assert!((s.score - w.as_f64().unwrap()).abs() < TOL, "pair {i}: {} vs {w}", s.score);
    }
}

#[test]
fn matches_reference_13a() {
    check_against_reference(BleuTokenizer::Mteval13a);
}

#[test]
fn matches_reference_char() {
    check_against_reference(BleuTokenizer::Char);
}

#[test]
fn identity_is_100() {
    let (_, refs) = pairs();
    for tok in [BleuTokenizer::Mteval13a, BleuTokenizer::Char] {
        assert_eq!(bleu(&refs, &refs, tok).unwrap().score, 100.0);
    }
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&["el", "gat", "és", "a", "casa", ".", ",", "no"][..]), 4..12)
        .prop_map(|ws| ws.join(" "))
}

proptest! {
    #[test]
    fn bounded(pairs in prop::collection::vec((sentence(), sentence()), 1..8)) {
        let (h, r): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        let s = bleu(&h, &r, BleuTokenizer::Mteval13a).unwrap();
        prop_assert!((0.0..=100.0).contains(&s.score));
    }

    #[test]
    fn order_of_pairs_does_not_matter(pairs in prop::collection::vec((sentence(), sentence()), 1..8)) {
        let (h, r): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
        let (hr, rr): (Vec<String>, Vec<String>) = pairs.into_iter().rev().unzip();
        let a = bleu(&h, &r, BleuTokenizer::Mteval13a).unwrap();
        let b = bleu(&hr, &rr, BleuTokenizer::Mteval13a).unwrap();
        prop_assert!((a.score - b.score).abs() < 1e-9);
    }

    #[test]
    fn identity_scores_100(refs in prop::collection::vec(sentence(), 1..8)) {
        prop_assert_eq!(bleu(&refs, &refs, BleuTokenizer::Mteval13a).unwrap().score, 100.0);
    }
}

#[test]
fn corrupting_words_lowers_the_score() {
    let reference = "the quick brown fox jumps over the lazy dog near the river bank";
    let words: Vec<&str> = reference.split(' ').collect();
    let mut last = 100.0;
    for k in 1..words.len() {
        let hyp: Vec<&str> = words.iter().enumerate().map(|(i, w)| if i < k { "zzz" } else { *w }).collect();
        let s = bleu(&[hyp.join(" ")], &[reference], BleuTokenizer::Mteval13a).unwrap().score;
        assert!(s <= last, "{k}: {s} > {last}");
        last = s;
    }
    assert!(last < 100.0);
}
