//! Words, factor occurrences, and the factor-equality oracle.
//!
//! Every evaluator in this crate represents a factor value by one occurrence
//! `(start, len)` inside a single host word. The leftmost occurrence of a value
//! is its canonical representative, so two canonical references are equal
//! exactly when the factors they denote are equal.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Characters that carry meaning in the formula and regex surface syntax.
pub const RESERVED_SYMBOLS: &[char] = &['"', '/', '\\'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("alphabet must not be empty")]
    EmptyAlphabet,
    #[error("symbol {0:?} is reserved and cannot be a letter")]
    ReservedSymbol(char),
    #[error("symbol {symbol:?} at position {position} is not in the alphabet {alphabet}")]
    OutsideAlphabet {
        symbol: char,
        position: usize,
        alphabet: String,
    },
}

/// A finite, non-empty, ordered set of letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    letters: BTreeSet<char>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(letters: I) -> Result<Self, WordError> {
        let letters: BTreeSet<char> = letters.into_iter().collect();
        if letters.is_empty() {
            return Err(WordError::EmptyAlphabet);
        }
        if let Some(&c) = letters
            .iter()
            .find(|c| RESERVED_SYMBOLS.contains(c) || c.is_whitespace())
        {
            return Err(WordError::ReservedSymbol(c));
        }
        Ok(Self { letters })
    }

    /// Parses an alphabet given as a plain string of letters, e.g. `"ab#"`.
    pub fn parse(text: &str) -> Result<Self, WordError> {
        Self::new(text.chars())
    }

    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        self.letters.iter().copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.letters.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// The smallest letter; used where a construction needs "some a ∈ Σ".
    pub fn first(&self) -> char {
        *self.letters.iter().next().expect("alphabet is non-empty")
    }

    /// Returns a copy extended with every letter in `extra`.
    pub fn union(&self, extra: impl IntoIterator<Item = char>) -> Result<Self, WordError> {
        Self::new(self.letters.iter().copied().chain(extra))
    }

    /// Every word over this alphabet of length at most `max_len`, ordered by
    /// length and then lexicographically.
    pub fn words_up_to(&self, max_len: usize) -> Vec<Word> {
        let letters: Vec<char> = self.letters().collect();
        let mut out = vec![Word::default()];
        let mut layer = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(layer.len() * letters.len());
            for w in &layer {
                for &c in &letters {
                    let mut v: Vec<char> = Vec::clone(w);
                    v.push(c);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned().map(Word::from_symbols));
            layer = next;
        }
        out
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.letters {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// An immutable word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    symbols: Vec<char>,
}

impl Word {
    pub fn new(text: &str) -> Self {
        Self {
            symbols: text.chars().collect(),
        }
    }

    pub fn from_symbols(symbols: Vec<char>) -> Self {
        Self { symbols }
    }

    /// Builds a word and checks every symbol against `alphabet`.
    pub fn over(text: &str, alphabet: &Alphabet) -> Result<Self, WordError> {
        for (i, c) in text.chars().enumerate() {
            if !alphabet.contains(c) {
                return Err(WordError::OutsideAlphabet {
                    symbol: c,
                    position: i + 1,
                    alphabet: alphabet.to_string(),
                });
            }
        }
        Ok(Self::new(text))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    /// The symbols of the factor `f`.
    pub fn slice(&self, f: FactorRef) -> &[char] {
        let start = f.start as usize - 1;
        &self.symbols[start..start + f.len as usize]
    }

    pub fn factor_string(&self, f: FactorRef) -> String {
        self.slice(f).iter().collect()
    }

    /// `true` iff `f` lies inside this word.
    pub fn contains_ref(&self, f: FactorRef) -> bool {
        f.start >= 1 && (f.start as usize - 1) + f.len as usize <= self.len()
    }

    /// The reference spanning the whole word.
    pub fn whole(&self) -> FactorRef {
        FactorRef::new(1, self.len())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        Word::new(s)
    }
}

/// An occurrence of a factor: 1-based start position and length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FactorRef {
    pub start: u32,
    pub len: u32,
}

impl FactorRef {
    pub fn new(start: usize, len: usize) -> Self {
        Self {
            start: start as u32,
            len: len as u32,
        }
    }

    /// The empty factor; its canonical occurrence starts at position 1.
    pub const EMPTY: FactorRef = FactorRef { start: 1, len: 0 };

    /// One past the last position covered by this occurrence.
    pub fn end(self) -> usize {
        self.start as usize + self.len as usize
    }
}

impl fmt::Display for FactorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.len)
    }
}

/// Dense longest-common-extension table for one word.
///
/// `lce(i, j)` is the length of the longest common prefix of the suffixes
/// starting at the 1-based positions `i` and `j` (position `n + 1` is the empty
/// suffix).
#[derive(Debug, Clone)]
pub struct EqualityOracle {
    n: usize,
    table: Vec<u32>,
}

impl EqualityOracle {
    pub fn build(w: &Word) -> Self {
        let n = w.len();
        let dim = n + 1;
        let mut table = vec![0u32; dim * dim];
        let s = w.symbols();
        // backward over both positions; row n (0-based) is the empty suffix
        for i in (0..n).rev() {
            for j in (0..n).rev() {
                if s[i] == s[j] {
                    table[i * dim + j] = table[(i + 1) * dim + j + 1] + 1;
                }
            }
        }
        Self { n, table }
    }

    pub fn word_len(&self) -> usize {
        self.n
    }

    /// Longest common extension of the suffixes at 1-based positions `i`, `j`.
    pub fn lce(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && j >= 1 && i <= self.n + 1 && j <= self.n + 1);
        self.table[(i - 1) * (self.n + 1) + (j - 1)] as usize
    }

    /// Whether the two occurrences denote the same word.
    pub fn factor_eq(&self, a: FactorRef, b: FactorRef) -> bool {
        a.len == b.len && (a.len == 0 || self.lce(a.start as usize, b.start as usize) >= a.len as usize)
    }
}

/// Everything an evaluator needs to know about one host word: the word, its
/// equality oracle, and the canonical occurrence of every factor.
#[derive(Debug, Clone)]
pub struct FactorIndex {
    word: Word,
    oracle: EqualityOracle,
    /// canonical start (1-based) for each (start, len) with len ≥ 1, stored
    /// row-wise per start position.
    canon: Vec<u32>,
    row_offset: Vec<usize>,
    factors: Vec<FactorRef>,
}

impl FactorIndex {
    pub fn new(word: Word) -> Self {
        let oracle = EqualityOracle::build(&word);
        let n = word.len();
        let mut row_offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            row_offset.push(total);
            total += n - i;
        }
        row_offset.push(total);
        let mut canon = vec![0u32; total];
        for i in 1..=n {
            let max_len = n + 1 - i;
            let row = row_offset[i - 1];
            // canonical start of (i, l) is the least j with lce(j, i) ≥ l,
            // which is non-decreasing in l.
            let mut assigned = 0usize;
            for j in 1..=i {
                let l = oracle.lce(j, i).min(max_len);
                while assigned < l {
                    canon[row + assigned] = j as u32;
                    assigned += 1;
                }
                if assigned == max_len {
                    break;
                }
            }
        }
        let mut factors = vec![FactorRef::EMPTY];
        for len in 1..=n {
            for start in 1..=n + 1 - len {
                if canon[row_offset[start - 1] + len - 1] as usize == start {
                    factors.push(FactorRef::new(start, len));
                }
            }
        }
        Self {
            word,
            oracle,
            canon,
            row_offset,
            factors,
        }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn oracle(&self) -> &EqualityOracle {
        &self.oracle
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    /// Canonical occurrences of all distinct factors, ordered by (len, start).
    pub fn factors(&self) -> &[FactorRef] {
        &self.factors
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn canonicalize(&self, f: FactorRef) -> FactorRef {
        if f.len == 0 {
            return FactorRef::EMPTY;
        }
        let start = self.canon[self.row_offset[f.start as usize - 1] + f.len as usize - 1];
        FactorRef {
            start,
            len: f.len,
        }
    }

    /// The canonical reference for the whole word (the value of `u`).
    pub fn whole(&self) -> FactorRef {
        self.canonicalize(self.word.whole())
    }

    pub fn factor_eq(&self, a: FactorRef, b: FactorRef) -> bool {
        self.oracle.factor_eq(a, b)
    }

    /// Finds the canonical occurrence of `text`, if it is a factor at all.
    pub fn find(&self, text: &[char]) -> Option<FactorRef> {
        if text.is_empty() {
            return Some(FactorRef::EMPTY);
        }
        let s = self.word.symbols();
        if text.len() > s.len() {
            return None;
        }
        (0..=s.len() - text.len())
            .find(|&i| &s[i..i + text.len()] == text)
            .map(|i| FactorRef::new(i + 1, text.len()))
    }

    pub fn text(&self, f: FactorRef) -> String {
        self.word.factor_string(f)
    }
}

/// Canonical occurrences of every distinct factor of `w`, including ε.
pub fn enumerate_factors(w: &Word) -> Vec<FactorRef> {
    FactorIndex::new(w.clone()).factors().to_vec()
}

/// Leftmost occurrence of the factor denoted by `f`.
pub fn canonicalize(w: &Word, f: FactorRef) -> FactorRef {
    FactorIndex::new(w.clone()).canonicalize(f)
}
