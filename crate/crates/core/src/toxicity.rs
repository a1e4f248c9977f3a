//! Wordlist toxicity classifier.
//!
//! Text and entries are compared after NFC normalization and full Unicode
//! case folding. Text is split on whitespace and each word loses its leading
//! and trailing non-alphanumeric characters, so `*idiota.` matches the entry
//! `idiota` while `assigned` does not match `ass`. Multiword entries match
//! runs of consecutive words.
//!
//! Scripts written without spaces between words are not segmented; such
//! languages only match when the text happens to contain whitespace-delimited
//! entries.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ToxicityError {
    #[error("wordlist for {language:?} has no entries")]
    EmptyWordlist { language: String },
    #[error("cannot compute a toxicity rate over an empty corpus")]
    EmptyCorpus,
}

/// NFC, case-fold, NFC. Idempotent.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().collect();
    caseless::default_case_fold_str(&composed).nfc().collect()
}

/// Drops leading and trailing characters that are neither letters nor digits.
pub fn strip_symbols(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric())
}

fn match_words(text: &str) -> Vec<String> {
    normalize(text).split_whitespace().map(|w| strip_symbols(w).to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToxicityWordlist {
    language: String,
    source: String,
    /// Normalized entries, words joined by single spaces.
    entries: BTreeSet<String>,
    /// Word count of the longest entry.
    max_words: usize,
}

impl ToxicityWordlist {
    /// Reads one entry per line; `#` starts a comment line. Duplicates
    /// collapse after normalization.
    pub fn load<I, S>(lines: I, language: &str) -> Result<Self, ToxicityError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::load_from(lines, language, "<memory>")
    }

    pub fn load_from<I, S>(lines: I, language: &str, source: &str) -> Result<Self, ToxicityError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries = BTreeSet::new();
        for line in lines {
            let line = line.as_ref().trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words = match_words(line);
            if words.iter().any(String::is_empty) {
                // an entry with a symbol-only word can never match stripped text
                let kept: Vec<_> = words.into_iter().filter(|w| !w.is_empty()).collect();
                if kept.is_empty() {
                    continue;
                }
                entries.insert(kept.join(" "));
            } else {
                entries.insert(words.join(" "));
            }
        }
        if entries.is_empty() {
            return Err(ToxicityError::EmptyWordlist { language: language.to_string() });
        }
        let max_words = entries.iter().map(|e| e.split(' ').count()).max().unwrap_or(1);
        Ok(ToxicityWordlist { language: language.to_string(), source: source.to_string(), entries, max_words })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, entry: &str) -> bool {
        self.entries.contains(entry)
    }

    /// Entries in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    /// Reports every entry occurrence in `text`.
    pub fn classify(&self, text: &str) -> ToxicityReport {
        let words = match_words(text);
        let mut matches = Vec::new();
        for start in 0..words.len() {
            if words[start].is_empty() {
                continue;
            }
            let mut phrase = String::new();
            for end in start + 1..=(start + self.max_words).min(words.len()) {
                let word = &words[end - 1];
                if word.is_empty() {
                    break;
                }
                if end > start + 1 {
                    phrase.push(' ');
                }
                phrase.push_str(word);
                if self.entries.contains(&phrase) {
                    matches.push(Match { entry: phrase.clone(), start, end });
                }
            }
        }
        ToxicityReport { is_toxic: !matches.is_empty(), matches }
    }
}

/// One wordlist hit; `start..end` indexes the whitespace-split words of the
/// classified text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Match {
    pub entry: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ToxicityReport {
    pub is_toxic: bool,
    pub matches: Vec<Match>,
}

impl ToxicityReport {
    /// Distinct matched entries in order of first occurrence.
    pub fn matched_entries(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.matches.iter().filter(|m| seen.insert(m.entry.as_str())).map(|m| m.entry.clone()).collect()
    }
}

/// Share of toxic sentences, kept as an exact count pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EtoxRate {
    pub toxic: usize,
    pub total: usize,
}

impl EtoxRate {
    pub fn fraction(&self) -> f64 {
        self.toxic as f64 / self.total as f64
    }

    /// Percentage with three decimals, e.g. `"0.300"` for 3 in 1000.
    pub fn percent(&self) -> String {
        format!("{:.3}", 100.0 * self.fraction())
    }
}

impl fmt::Display for EtoxRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.percent())
    }
}

pub fn corpus_etox<'a, I>(reports: I) -> Result<EtoxRate, ToxicityError>
where
    I: IntoIterator<Item = &'a ToxicityReport>,
{
    let (toxic, total) = reports.into_iter().fold((0, 0), |(t, n), r| (t + usize::from(r.is_toxic), n + 1));
    if total == 0 {
        return Err(ToxicityError::EmptyCorpus);
    }
    Ok(EtoxRate { toxic, total })
}
