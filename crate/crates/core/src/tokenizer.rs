//! Greedy longest-match subword tokenizer over a plain vocabulary file.
//!
//! Word-initial pieces carry a boundary glyph (`▁` unless the vocab file
//! header says otherwise). A word `w` is segmented as the string
//! `glyph + w`, so the first piece of every word is one that starts with
//! the glyph. Besides the canonical greedy segmentation, every alternative
//! segmentation of a word can be enumerated so that a decoder can be kept
//! away from all of them at once.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

pub type TokenId = u32;

pub const DEFAULT_BOUNDARY: char = '\u{2581}';
pub const BOS_SURFACE: &str = "<s>";
pub const EOS_SURFACE: &str = "</s>";
pub const UNK_SURFACE: &str = "<unk>";

/// Default number of segmentations kept per word.
pub const DEFAULT_SEGMENTATION_CAP: usize = 64;

/// Upper bound on the number of segmentations the enumerator will
/// materialize before falling back to the canonical one.
const SEGMENTATION_BUDGET: u64 = 1 << 16;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("vocabulary file has no entries")]
    Empty,
    #[error("token ids are not dense: id {0} is missing")]
    MissingId(TokenId),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    InvalidToken { id: TokenId, size: usize },
}

/// A sequence of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<TokenId>);

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Self {
        TokenSeq(ids)
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }

    pub fn push(&mut self, id: TokenId) {
        self.0.push(id);
    }

    /// Returns true if `needle` occurs as a contiguous run inside this sequence.
    pub fn contains_run(&self, needle: &[TokenId]) -> bool {
        !needle.is_empty() && self.0.windows(needle.len()).any(|w| w == needle)
    }
}

impl Deref for TokenSeq {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(ids: Vec<TokenId>) -> Self {
        TokenSeq(ids)
    }
}

impl FromIterator<TokenId> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().collect())
    }
}

/// Immutable subword inventory with dense ids and three reserved specials.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    ids: HashMap<String, TokenId>,
    bos: TokenId,
    eos: TokenId,
    unk: TokenId,
    boundary: char,
    /// Longest non-special piece, in chars.
    max_piece_chars: usize,
}

impl Vocabulary {
    /// Parses a vocab file: one `surface<TAB>id` or bare `surface` per line.
    ///
    /// A bare surface gets the next id after the last one assigned. Lines
    /// starting with `#` are comments, except a first-line `#boundary=<glyph>`
    /// header. Surfaces are NFC-normalized. `<s>`, `</s>` and `<unk>` are
    /// appended when the file does not define them.
    pub fn load<I, S>(lines: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut boundary = DEFAULT_BOUNDARY;
        let mut by_id: HashMap<TokenId, String> = HashMap::new();
        let mut ids: HashMap<String, TokenId> = HashMap::new();
        let mut next_id: TokenId = 0;

        for (idx, raw) in lines.into_iter().enumerate() {
            let lineno = idx + 1;
            let line = raw.as_ref().trim_end_matches(['\r', '\n']);
            if idx == 0 {
                if let Some(glyph) = line.strip_prefix("#boundary=") {
                    let mut chars = glyph.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) if !c.is_whitespace() => boundary = c,
                        _ => {
                            return Err(VocabError::Format {
                                line: lineno,
                                msg: format!("boundary header must name one glyph, got {glyph:?}"),
                            })
                        }
                    }
                    continue;
                }
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, id) = match line.split_once('\t') {
                Some((surface, id)) => {
                    let id = id
                        .trim()
                        .parse::<TokenId>()
                        .map_err(|_| VocabError::Format { line: lineno, msg: format!("invalid token id {id:?}") })?;
                    (surface, id)
                }
                None => (line, next_id),
            };
            let surface: String = surface.nfc().collect();
            if surface.is_empty() {
                return Err(VocabError::Format { line: lineno, msg: "empty surface".into() });
            }
            if surface.chars().any(char::is_whitespace) {
                return Err(VocabError::Format {
                    line: lineno,
                    msg: format!("surface {surface:?} contains whitespace"),
                });
            }
            if ids.contains_key(&surface) {
                return Err(VocabError::Format { line: lineno, msg: format!("duplicate surface {surface:?}") });
            }
            if by_id.contains_key(&id) {
                return Err(VocabError::Format { line: lineno, msg: format!("duplicate id {id}") });
            }
            ids.insert(surface.clone(), id);
            by_id.insert(id, surface);
            next_id = id + 1;
        }

        if by_id.is_empty() {
            return Err(VocabError::Empty);
        }
        let size = by_id.len();
        let mut surfaces = Vec::with_capacity(size + 3);
        for id in 0..size as TokenId {
            match by_id.remove(&id) {
                Some(s) => surfaces.push(s),
                None => return Err(VocabError::MissingId(id)),
            }
        }
        Ok(Self::assemble(surfaces, ids, boundary))
    }

    fn assemble(mut surfaces: Vec<String>, mut ids: HashMap<String, TokenId>, boundary: char) -> Self {
        let mut special = |name: &str| -> TokenId {
            if let Some(&id) = ids.get(name) {
                return id;
            }
            let id = surfaces.len() as TokenId;
            surfaces.push(name.to_string());
            ids.insert(name.to_string(), id);
            id
        };
        let bos = special(BOS_SURFACE);
        let eos = special(EOS_SURFACE);
        let unk = special(UNK_SURFACE);
        let max_piece_chars = surfaces
            .iter()
            .enumerate()
            .filter(|&(i, _)| ![bos, eos, unk].contains(&(i as TokenId)))
            .map(|(_, s)| s.chars().count())
            .max()
            .unwrap_or(0);
        Vocabulary { surfaces, ids, bos, eos, unk, boundary, max_piece_chars }
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn unk(&self) -> TokenId {
        self.unk
    }

    pub fn boundary(&self) -> char {
        self.boundary
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id == self.bos || id == self.eos || id == self.unk
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.ids.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    /// True if the piece starts a word (carries the boundary glyph).
    pub fn is_word_initial(&self, id: TokenId) -> bool {
        self.surface(id).is_some_and(|s| s.starts_with(self.boundary))
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &str)> {
        self.surfaces.iter().enumerate().map(|(i, s)| (i as TokenId, s.as_str()))
    }

    fn piece(&self, chars: &[char]) -> Option<TokenId> {
        let s: String = chars.iter().collect();
        self.ids.get(&s).copied().filter(|&id| !self.is_special(id))
    }

    fn marked(&self, word: &str) -> Vec<char> {
        std::iter::once(self.boundary).chain(word.chars()).collect()
    }

    /// Whitespace-delimited words after NFC. The boundary glyph counts as
    /// a separator too, since it cannot occur inside a word.
    fn words(&self, text: &str) -> Vec<String> {
        let text: String = text.nfc().collect();
        text.split(|c: char| c.is_whitespace() || c == self.boundary)
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect()
    }

    /// Greedy longest-match segmentation, word by word.
    pub fn tokenize(&self, text: &str) -> TokenSeq {
        let mut out = Vec::new();
        for word in self.words(text) {
            self.tokenize_word_into(&word, &mut out);
        }
        TokenSeq(out)
    }

    fn tokenize_word_into(&self, word: &str, out: &mut Vec<TokenId>) {
        let chars = self.marked(word);
        let mut pos = 0;
        while pos < chars.len() {
            let longest = self.max_piece_chars.min(chars.len() - pos);
            let found = (1..=longest).rev().find_map(|len| self.piece(&chars[pos..pos + len]).map(|id| (id, len)));
            match found {
                Some((id, len)) => {
                    out.push(id);
                    pos += len;
                }
                None => {
                    out.push(self.unk);
                    // an unknown word start swallows the glyph with the first char
                    pos += if pos == 0 { 2.min(chars.len()) } else { 1 };
                }
            }
        }
    }

    /// Concatenates surfaces, turning boundary glyphs into spaces. BOS and
    /// EOS are skipped.
    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String, VocabError> {
        let mut text = String::new();
        for &id in ids {
            let surface = self.surface(id).ok_or(VocabError::InvalidToken { id, size: self.len() })?;
            if id == self.bos || id == self.eos {
                continue;
            }
            text.extend(surface.chars().map(|c| if c == self.boundary { ' ' } else { c }));
        }
        Ok(match text.strip_prefix(' ') {
            Some(rest) => rest.to_string(),
            None => text,
        })
    }

    /// All segmentations of `word` into non-special pieces, first piece
    /// word-initial.
    ///
    /// Ordered by piece count, then lexicographically by id, and cut to
    /// `cap` entries. The canonical [`Vocabulary::tokenize`] output is always
    /// present; if it would fall past the cut it takes the last slot.
    pub fn enumerate_segmentations(&self, word: &str, cap: usize) -> Segmentations {
        let cap = cap.max(1);
        let word: String = word.nfc().collect();
        let canonical = self.tokenize(&word);
        let chars = self.marked(&word);
        let n = chars.len();

        // edges[i] = (piece id, end) for pieces starting at i
        let mut edges: Vec<Vec<(TokenId, usize)>> = vec![Vec::new(); n];
        for (start, out) in edges.iter_mut().enumerate() {
            let longest = self.max_piece_chars.min(n - start);
            for len in 1..=longest {
                if let Some(id) = self.piece(&chars[start..start + len]) {
                    out.push((id, start + len));
                }
            }
        }
        // ways[i] = number of segmentations of chars[i..], saturating
        let mut ways = vec![0u64; n + 1];
        ways[n] = 1;
        for start in (0..n).rev() {
            ways[start] = edges[start].iter().fold(0u64, |acc, &(_, end)| acc.saturating_add(ways[end]));
        }
        let total = ways[0];

        if total > SEGMENTATION_BUDGET {
            return Segmentations { seqs: vec![canonical], total, truncated: true, budget_exceeded: true };
        }

        let mut all = Vec::with_capacity(total as usize);
        let mut stack = Vec::new();
        collect_paths(&edges, &ways, 0, n, &mut stack, &mut all);
        all.sort_by(|a: &TokenSeq, b: &TokenSeq| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        all.dedup();

        let mut truncated = false;
        if all.len() > cap {
            all.truncate(cap);
            truncated = true;
        }
        if !all.contains(&canonical) {
            if all.len() == cap {
                all.pop();
                truncated = true;
            }
            all.push(canonical);
            all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        }
        Segmentations { seqs: all, total, truncated, budget_exceeded: false }
    }
}

fn collect_paths(
    edges: &[Vec<(TokenId, usize)>],
    ways: &[u64],
    pos: usize,
    end: usize,
    stack: &mut Vec<TokenId>,
    out: &mut Vec<TokenSeq>,
) {
    if pos == end {
        out.push(TokenSeq(stack.clone()));
        return;
    }
    for &(id, next) in &edges[pos] {
        if ways[next] == 0 {
            continue;
        }
        stack.push(id);
        collect_paths(edges, ways, next, end, stack, out);
        stack.pop();
    }
}

/// Result of [`Vocabulary::enumerate_segmentations`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentations {
    pub seqs: Vec<TokenSeq>,
    /// Number of full-coverage segmentations found (saturating).
    pub total: u64,
    /// Fewer sequences returned than exist.
    pub truncated: bool,
    /// The count exceeded the enumeration budget; only the canonical
    /// segmentation was returned.
    pub budget_exceeded: bool,
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}
