#![allow(dead_code)]

pub mod oracle;
pub mod synthetic;

use std::path::PathBuf;

use mintox_core::{ToxicityWordlist, ToyModel, Vocabulary};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn wordlist(name: &str, language: &str) -> ToxicityWordlist {
    ToxicityWordlist::load(read_fixture(name).lines(), language).unwrap()
}

/// The English/Spanish "stocky girl" fixture.
pub struct Stocky {
    pub vocab: Vocabulary,
    pub model: ToyModel,
    pub eng: ToxicityWordlist,
    pub spa: ToxicityWordlist,
}

pub const STOCKY_SOURCE: &str = "Just so you know, I'm a stocky girl.";

pub fn stocky() -> Stocky {
    let vocab = Vocabulary::load(read_fixture("vocab40.tsv").lines()).unwrap();
    let model = ToyModel::from_rule_lines(read_fixture("stocky_rules.tsv").lines(), &vocab, 1.0).unwrap();
    Stocky { vocab, model, eng: wordlist("toxicity_eng.txt", "eng"), spa: wordlist("toxicity_spa.txt", "spa") }
}
