//! A 200-sentence synthetic corpus with a hand-written toy model.
//!
//! Source `k` is `"s<k>"`. Every output reads `això és <word>.`. A quarter of
//! the sentences (k % 4 == 0) prefer a toxic word over a clean alternative.
//! Sentence 0 prefers `porqueria`, which the vocabulary can also spell as
//! `▁por qu eria`; the model's second choice after `▁por` is exactly that.

use mintox_core::pipeline::CorpusEntry;
use mintox_core::{Rule, ToxicityWordlist, ToyModel, Vocabulary};

use super::wordlist;

pub const SENTENCES: usize = 200;
pub const EVASION_ID: &str = "s0";
pub const SUBSTITUTION_ID: &str = "sub";

const CLEAN: [&str; 10] = ["casa", "gat", "llibre", "taula", "finestra", "arbre", "riu", "mar", "sol", "lluna"];
const ALTERNATIVES: [&str; 5] = ["babau", "ximple", "brossa", "beneit", "pocatraça"];
/// Toxic words (all in the Catalan fixture list) with their pieces.
const TOXIC: [(&str, &[&str]); 9] = [
    ("idiota", &["▁idiota"]),
    ("merda", &["▁merda"]),
    ("tonta", &["▁tonta"]),
    ("imbècil", &["▁imb", "ècil"]),
    ("cabró", &["▁cab", "ró"]),
    ("polla", &["▁polla"]),
    ("tonto", &["▁tonto"]),
    ("cony", &["▁cony"]),
    ("puta", &["▁puta"]),
];
const PORQUERIA: &[&str] = &["▁por", "quer", "ia"];
const PORQUERIA_ALT: &[&str] = &["▁por", "qu", "eria"];

pub struct Synthetic {
    pub vocab: Vocabulary,
    pub model: ToyModel,
    pub src_wordlist: ToxicityWordlist,
    pub tgt_wordlist: ToxicityWordlist,
    pub corpus: Vec<CorpusEntry>,
    /// Ids whose unconstrained output is toxic.
    pub toxic_ids: Vec<String>,
}

fn vocab() -> Vocabulary {
    let mut pieces: Vec<String> = vec!["▁això".into(), "▁és".into(), ".".into(), "▁s".into()];
    pieces.extend((0..10).map(|d| d.to_string()));
    pieces.extend(CLEAN.iter().chain(ALTERNATIVES.iter()).map(|w| format!("▁{w}")));
    pieces.push("▁t".into());
    for (_, toks) in TOXIC {
        pieces.extend(toks.iter().map(|t| t.to_string()));
    }
    pieces.extend(PORQUERIA.iter().chain(PORQUERIA_ALT.iter()).map(|t| t.to_string()));
    pieces.sort();
    pieces.dedup();
    Vocabulary::load(&pieces).unwrap()
}

/// Rules that spell `pieces` after `és` with the given first-step weight.
fn word_path(src: &str, pieces: &[&str], first_weight: f64, rules: &mut Vec<Rule>) {
    rules.push(Rule::new(Some(src), pieces[0], first_weight, &["▁és"]));
    for i in 1..pieces.len() {
        rules.push(Rule::new(Some(src), pieces[i], 8.0, &pieces[..i]));
    }
    rules.push(Rule::new(Some(src), ".", 8.0, &pieces[pieces.len() - 1..]));
}

fn shared_rules() -> Vec<Rule> {
    vec![
        Rule::new(None, "▁això", 8.0, &["<s>"]),
        Rule::new(None, "▁és", 8.0, &["▁això"]),
        Rule::new(None, "</s>", 8.0, &["."]),
    ]
}

/// The 200-sentence corpus. References are the clean alternatives.
pub fn build() -> Synthetic {
    build_with(false)
}

/// Same corpus plus one sentence where banning `merda` surfaces
/// `porqueria` before the clean `brossa`.
pub fn build_with_substitution() -> Synthetic {
    build_with(true)
}

fn build_with(substitution: bool) -> Synthetic {
    let vocab = vocab();
    let mut rules = shared_rules();
    let mut corpus = Vec::new();
    let mut toxic_ids = Vec::new();
    let mut toxic_seen = 0;

    for k in 0..SENTENCES {
        let src = format!("s{k}");
        let reference = if k % 4 == 0 {
            let alt = ALTERNATIVES[toxic_seen % ALTERNATIVES.len()];
            let alt_piece = format!("▁{alt}");
            word_path(&src, &[alt_piece.as_str()], 2.0, &mut rules);
            if k == 0 {
                word_path(&src, PORQUERIA, 5.0, &mut rules);
                // second-best continuation after ▁por spells the same word
                rules.push(Rule::new(Some(&src), "qu", 6.0, &["▁por"]));
                rules.push(Rule::new(Some(&src), "eria", 8.0, &["▁por", "qu"]));
                rules.push(Rule::new(Some(&src), ".", 8.0, &["eria"]));
            } else {
                let (_, pieces) = TOXIC[(toxic_seen - 1) % TOXIC.len()];
                word_path(&src, pieces, 5.0, &mut rules);
            }
            toxic_seen += 1;
            toxic_ids.push(src.clone());
            format!("això és {alt}.")
        } else {
            let clean = CLEAN[k % CLEAN.len()];
            let piece = format!("▁{clean}");
            word_path(&src, &[piece.as_str()], 6.0, &mut rules);
            format!("això és {clean}.")
        };
        corpus.push(CorpusEntry { id: src.clone(), src, reference: Some(reference) });
    }

    if substitution {
        // source "t": merda first, porqueria second, brossa last
        let src = "t";
        word_path(src, &["▁merda"], 6.0, &mut rules);
        word_path(src, PORQUERIA, 5.0, &mut rules);
        word_path(src, &["▁brossa"], 2.0, &mut rules);
        corpus.push(CorpusEntry {
            id: SUBSTITUTION_ID.into(),
            src: src.into(),
            reference: Some("això és brossa.".into()),
        });
        toxic_ids.push(SUBSTITUTION_ID.into());
    }

    let model = ToyModel::new(&rules, &vocab, 1.0).unwrap();
    Synthetic {
        vocab,
        model,
        src_wordlist: wordlist("toxicity_eng.txt", "eng"),
        tgt_wordlist: wordlist("toxicity_cat.txt", "cat"),
        corpus,
        toxic_ids,
    }
}
