//! Next-token scoring interface and a rule-table toy translation model.
//!
//! The toy model starts every step from a flat logit vector and adds the
//! weight of every rule whose conditions hold, then applies a temperature
//! and a log-softmax. Rule files are tab-separated:
//!
//! ```text
//! # src_word  tgt_token  weight  [context]
//! stocky      ▁robusta   2.0     ▁chica
//! *           </s>       8.0     .
//! ```
//!
//! `src_word` is a source word or phrase that must occur in the source
//! (whole words), or `*` for any source. `context` is an optional
//! space-separated run of target tokens the prefix must end with; `<s>`
//! anchors a rule at the start of the output. BOS is never predicted.

use std::collections::HashMap;

use crate::tokenizer::{TokenId, Vocabulary};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("rule {rule}: unknown token {surface:?}")]
    UnknownToken { rule: usize, surface: String },
    #[error("rule {rule}: source word {word:?} is not representable in the vocabulary")]
    UnknownSourceWord { rule: usize, word: String },
    #[error("rule {rule}: weight {weight} is not finite")]
    NonFiniteWeight { rule: usize, weight: f64 },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Anything that yields next-token log-probabilities for a source and a
/// BOS-initiated target prefix.
///
/// Implementations must return `vocab_size()` entries whose exponentials sum
/// to one, every entry at most zero, and a finite EOS entry. Equal inputs
/// must give equal outputs.
pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn bos(&self) -> TokenId;
    fn eos(&self) -> TokenId;
    fn score(&self, source: &[TokenId], prefix: &[TokenId]) -> Vec<f64>;
}

/// One line of a rule table, before resolution against a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// Source word or phrase; `None` matches any source.
    pub source: Option<String>,
    pub target: String,
    pub weight: f64,
    pub context: Vec<String>,
}

impl Rule {
    pub fn new(source: Option<&str>, target: &str, weight: f64, context: &[&str]) -> Self {
        Rule {
            source: source.map(str::to_string),
            target: target.to_string(),
            weight,
            context: context.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Parses the tab-separated rule format described in the module docs.
pub fn parse_rules<I, S>(lines: I) -> Result<Vec<Rule>, ModelError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut rules = Vec::new();
    for (idx, raw) in lines.into_iter().enumerate() {
        let line = raw.as_ref().trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(ModelError::Format {
                line: idx + 1,
                msg: format!("expected 3 or 4 tab-separated columns, got {}", cols.len()),
            });
        }
        let weight: f64 = cols[2]
            .trim()
            .parse()
            .map_err(|_| ModelError::Format { line: idx + 1, msg: format!("invalid weight {:?}", cols[2]) })?;
        let source = match cols[0].trim() {
            "*" => None,
            s => Some(s.to_string()),
        };
        let context = cols.get(3).map(|c| c.split_whitespace().map(str::to_string).collect()).unwrap_or_default();
        rules.push(Rule { source, target: cols[1].trim().to_string(), weight, context });
    }
    Ok(rules)
}

#[derive(Debug, Clone)]
struct CompiledRule {
    source: Option<Vec<TokenId>>,
    target: TokenId,
    weight: f64,
    context: Vec<TokenId>,
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    vocab_size: usize,
    bos: TokenId,
    eos: TokenId,
    temperature: f64,
    word_initial: Vec<bool>,
    /// Rules keyed by the last context token; `None` for context-free rules.
    by_last: HashMap<Option<TokenId>, Vec<CompiledRule>>,
}

impl ToyModel {
    pub fn new(rules: &[Rule], vocab: &Vocabulary, temperature: f64) -> Result<Self, ModelError> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(ModelError::InvalidTemperature(temperature));
        }
        let token = |rule: usize, surface: &str| {
            vocab.id(surface).ok_or_else(|| ModelError::UnknownToken { rule, surface: surface.to_string() })
        };
        let mut by_last: HashMap<Option<TokenId>, Vec<CompiledRule>> = HashMap::new();
        for (i, rule) in rules.iter().enumerate() {
            if !rule.weight.is_finite() {
                return Err(ModelError::NonFiniteWeight { rule: i, weight: rule.weight });
            }
            let source = match &rule.source {
                None => None,
                Some(word) => {
                    let ids = vocab.tokenize(word);
                    if ids.is_empty() || ids.contains(&vocab.unk()) {
                        return Err(ModelError::UnknownSourceWord { rule: i, word: word.clone() });
                    }
                    Some(ids.into_inner())
                }
            };
            let target = token(i, &rule.target)?;
            let context = rule.context.iter().map(|s| token(i, s)).collect::<Result<Vec<_>, _>>()?;
            by_last.entry(context.last().copied()).or_default().push(CompiledRule {
                source,
                target,
                weight: rule.weight,
                context,
            });
        }
        let word_initial = (0..vocab.len() as TokenId).map(|id| vocab.is_word_initial(id)).collect();
        Ok(ToyModel { vocab_size: vocab.len(), bos: vocab.bos(), eos: vocab.eos(), temperature, word_initial, by_last })
    }

    pub fn from_rule_lines<I, S>(lines: I, vocab: &Vocabulary, temperature: f64) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(&parse_rules(lines)?, vocab, temperature)
    }

    /// Whole-word occurrence of `pattern` in `source`.
    fn source_has(&self, source: &[TokenId], pattern: &[TokenId]) -> bool {
        if pattern.len() > source.len() {
            return false;
        }
        (0..=source.len() - pattern.len()).any(|at| {
            source[at..at + pattern.len()] == *pattern
                && source
                    .get(at + pattern.len())
                    .is_none_or(|&next| self.word_initial.get(next as usize).copied().unwrap_or(true))
        })
    }

    fn applies(&self, rule: &CompiledRule, source: &[TokenId], prefix: &[TokenId]) -> bool {
        prefix.ends_with(&rule.context) && rule.source.as_deref().is_none_or(|p| self.source_has(source, p))
    }
}

impl Scorer for ToyModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn bos(&self) -> TokenId {
        self.bos
    }

    fn eos(&self) -> TokenId {
        self.eos
    }

    fn score(&self, source: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        let mut logits = vec![0.0; self.vocab_size];
        let keys = [None, prefix.last().copied()];
        for key in keys.iter() {
            for rule in self.by_last.get(key).into_iter().flatten() {
                if self.applies(rule, source, prefix) {
                    logits[rule.target as usize] += rule.weight;
                }
            }
            if prefix.is_empty() {
                break;
            }
        }
        for l in logits.iter_mut() {
            *l /= self.temperature;
        }
        logits[self.bos as usize] = f64::NEG_INFINITY;
        log_softmax(&mut logits);
        logits
    }
}

/// In-place log-softmax; every output is `<= 0`.
pub fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return;
    }
    let log_z = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    for l in logits.iter_mut() {
        *l = (*l - max) - log_z;
    }
}

/// `ln(sum(exp(xs)))`, stable.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::load(["▁a", "▁b", "c", "."]).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap()
    }

    #[test]
    fn empty_rules_are_uniform_over_non_bos() {
        let v = vocab();
        let m = ToyModel::new(&[], &v, 1.0).unwrap();
        let lp = m.score(&[], &[v.bos()]);
        assert_eq!(lp.len(), v.len());
        assert!(logsumexp(&lp).abs() < 1e-12);
        assert_eq!(lp[v.bos() as usize], f64::NEG_INFINITY);
        let expected = -((v.len() - 1) as f64).ln();
        for (id, &x) in lp.iter().enumerate() {
            if id as TokenId != v.bos() {
                assert!((x - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn context_and_source_conditions() {
        let v = vocab();
        let rules = vec![Rule::new(Some("b"), "c", 5.0, &["▁a"]), Rule::new(None, "▁a", 3.0, &["<s>"])];
        let m = ToyModel::new(&rules, &v, 1.0).unwrap();
        let src_b = v.tokenize("b");
        let a = v.id("▁a").unwrap();
        assert_eq!(argmax(&m.score(&src_b, &[v.bos()])), a as usize);
        assert_eq!(argmax(&m.score(&src_b, &[v.bos(), a])), v.id("c").unwrap() as usize);
        // source lacks "b": the context rule stays silent
        let lp = m.score(&v.tokenize("a"), &[v.bos(), a]);
        assert!((lp[v.id("c").unwrap() as usize] - lp[v.eos() as usize]).abs() < 1e-12);
    }

    #[test]
    fn source_match_is_whole_word() {
        let v = Vocabulary::load(["▁stock", "y", "▁x"]).unwrap();
        let rules = vec![Rule::new(Some("stock"), "▁x", 4.0, &[])];
        let m = ToyModel::new(&rules, &v, 1.0).unwrap();
        let x = v.id("▁x").unwrap() as usize;
        let hit = m.score(&v.tokenize("stock x"), &[v.bos()]);
        let miss = m.score(&v.tokenize("stocky"), &[v.bos()]);
        assert!(hit[x] > miss[x]);
    }

    #[test]
    fn eos_rule_forces_short_decode() {
        let v = vocab();
        let rules = vec![Rule::new(None, "▁a", 9.0, &["<s>"]), Rule::new(None, "</s>", 9.0, &["▁a"])];
        let m = ToyModel::new(&rules, &v, 1.0).unwrap();
        let a = v.id("▁a").unwrap();
        assert_eq!(argmax(&m.score(&[], &[v.bos()])), a as usize);
        assert_eq!(argmax(&m.score(&[], &[v.bos(), a])), v.eos() as usize);
    }

    #[test]
    fn temperature_flattens() {
        let v = vocab();
        let rules = vec![Rule::new(None, "c", 2.0, &[])];
        let hot = ToyModel::new(&rules, &v, 4.0).unwrap().score(&[], &[v.bos()]);
        let cold = ToyModel::new(&rules, &v, 0.5).unwrap().score(&[], &[v.bos()]);
        let c = v.id("c").unwrap() as usize;
        assert!(cold[c] > hot[c]);
    }

    #[test]
    fn construction_errors() {
        let v = vocab();
        let bad_tok = ToyModel::new(&[Rule::new(None, "zz", 1.0, &[])], &v, 1.0).unwrap_err();
        assert_eq!(bad_tok, ModelError::UnknownToken { rule: 0, surface: "zz".into() });
        let bad_ctx = ToyModel::new(&[Rule::new(None, "c", 1.0, &["q"])], &v, 1.0).unwrap_err();
        assert!(matches!(bad_ctx, ModelError::UnknownToken { .. }));
        let bad_src = ToyModel::new(&[Rule::new(Some("zzz"), "c", 1.0, &[])], &v, 1.0).unwrap_err();
        assert!(matches!(bad_src, ModelError::UnknownSourceWord { .. }));
        assert_eq!(ToyModel::new(&[], &v, 0.0).unwrap_err(), ModelError::InvalidTemperature(0.0));
        let nan = ToyModel::new(&[Rule::new(None, "c", f64::NAN, &[])], &v, 1.0).unwrap_err();
        assert!(matches!(nan, ModelError::NonFiniteWeight { .. }));
    }

    #[test]
    fn rule_file_parsing() {
        let rules = parse_rules(["# comment", "stocky\t▁robusta\t2.0\t▁chica", "*\t</s>\t8", ""]).unwrap();
        assert_eq!(
            rules,
            vec![Rule::new(Some("stocky"), "▁robusta", 2.0, &["▁chica"]), Rule::new(None, "</s>", 8.0, &[]),]
        );
        let err = parse_rules(["a\tb"]).unwrap_err();
        assert!(matches!(err, ModelError::Format { line: 1, .. }));
        let err = parse_rules(["# x", "a\tb\tbig"]).unwrap_err();
        assert!(matches!(err, ModelError::Format { line: 2, .. }));
    }

    #[test]
    fn scoring_is_deterministic() {
        let v = vocab();
        let rules = vec![Rule::new(None, "c", 1.5, &["▁a"]), Rule::new(Some("a"), "▁b", 0.5, &[])];
        let m = ToyModel::new(&rules, &v, 0.7).unwrap();
        let a = v.id("▁a").unwrap();
        let src = v.tokenize("a b");
        assert_eq!(m.score(&src, &[v.bos(), a]), m.score(&src, &[v.bos(), a]));
    }
}
