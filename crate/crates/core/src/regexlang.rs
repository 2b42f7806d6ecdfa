//! Regular expressions for constraints: parsing, a Thompson-automaton matcher,
//! simple-regex detection, the translation of simple regexes into
//! existential-positive FC, and regex equations.
//!
//! Literal syntax (between slashes in formulas): letters stand for themselves,
//! `S` is Σ, `()` is ε, `\0` is ∅, `|` is union, `*` and `+` are postfix, and
//! whitespace is ignored. A backslash makes the next character literal.

use std::fmt;

use thiserror::Error;

use crate::spanner::RegexFormula;
use crate::syntax::{self, Formula, FreshNames, Pattern, Term, Tok};
use crate::word::Alphabet;

/// Characters with a meaning inside a regex literal.
const META: &[char] = &['(', ')', '|', '*', '+', '/', '\\', '{', '}', 'S'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("at offset {position}: {message}")]
pub struct RegexError {
    /// 0-based character offset into the regex source.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegexLangError {
    #[error("regular expression {0} is not simple")]
    NotSimple(String),
    #[error("the root of the empty word is undefined")]
    EmptyRoot,
    #[error(transparent)]
    Parse(#[from] RegexError),
    #[error(transparent)]
    Syntax(#[from] syntax::SyntaxError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Regex {
    Empty,
    Eps,
    Letter(char),
    /// Any single letter of the alphabet.
    Sigma,
    Concat(Box<Regex>, Box<Regex>),
    Union(Box<Regex>, Box<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    pub fn parse(text: &str) -> Result<Regex, RegexError> {
        let tree = parse_tree(text, false)?;
        Ok(Regex::from_tree(&tree).expect("bindings are rejected by the parser"))
    }

    fn from_tree(t: &RegexFormula) -> Option<Regex> {
        Some(match t {
            RegexFormula::Empty => Regex::Empty,
            RegexFormula::Eps => Regex::Eps,
            RegexFormula::Letter(c) => Regex::Letter(*c),
            RegexFormula::Sigma => Regex::Sigma,
            RegexFormula::Concat(a, b) => Regex::concat(Self::from_tree(a)?, Self::from_tree(b)?),
            RegexFormula::Union(a, b) => Regex::union(Self::from_tree(a)?, Self::from_tree(b)?),
            RegexFormula::Star(a) => Regex::star(Self::from_tree(a)?),
            RegexFormula::Bind(..) => return None,
        })
    }

    pub fn concat(a: Regex, b: Regex) -> Regex {
        Regex::Concat(Box::new(a), Box::new(b))
    }

    pub fn union(a: Regex, b: Regex) -> Regex {
        Regex::Union(Box::new(a), Box::new(b))
    }

    pub fn star(a: Regex) -> Regex {
        Regex::Star(Box::new(a))
    }

    /// The regex denoting exactly the word `s`.
    pub fn word(s: &str) -> Regex {
        s.chars()
            .map(Regex::Letter)
            .reduce(Regex::concat)
            .unwrap_or(Regex::Eps)
    }

    /// If this regex denotes a single word built only from letters, ε, and
    /// concatenation, returns that word.
    pub fn as_word(&self) -> Option<Vec<char>> {
        match self {
            Regex::Eps => Some(Vec::new()),
            Regex::Letter(c) => Some(vec![*c]),
            Regex::Concat(a, b) => {
                let mut w = a.as_word()?;
                w.extend(b.as_word()?);
                Some(w)
            }
            _ => None,
        }
    }

    /// Compiles the regex into an automaton.
    pub fn compile(&self) -> Matcher {
        Matcher::new(self)
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_regex(f, self, 0)
    }
}

pub(crate) fn write_letter(f: &mut fmt::Formatter<'_>, c: char) -> fmt::Result {
    if META.contains(&c) {
        write!(f, "\\{c}")
    } else {
        write!(f, "{c}")
    }
}

/// `level`: 0 = union context, 1 = concatenation, 2 = operand of a star.
fn write_regex(f: &mut fmt::Formatter<'_>, r: &Regex, level: u8) -> fmt::Result {
    let paren = match r {
        Regex::Union(..) => level > 0,
        Regex::Concat(..) => level > 1,
        _ => false,
    };
    if paren {
        write!(f, "(")?;
    }
    match r {
        Regex::Empty => write!(f, "\\0")?,
        Regex::Eps => write!(f, "()")?,
        Regex::Letter(c) => write_letter(f, *c)?,
        Regex::Sigma => write!(f, "S")?,
        Regex::Union(a, b) => {
            write_regex(f, a, 0)?;
            write!(f, "|")?;
            write_regex(f, b, if matches!(**b, Regex::Union(..)) { 1 } else { 0 })?;
        }
        Regex::Concat(a, b) => {
            write_regex(f, a, 1)?;
            write_regex(f, b, if matches!(**b, Regex::Concat(..)) { 2 } else { 1 })?;
        }
        Regex::Star(a) => {
            write_regex(f, a, 2)?;
            write!(f, "*")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// parser shared with the spanner regex formulas

struct RegexParser<'a> {
    chars: &'a [char],
    pos: usize,
    bindings: bool,
}

impl RegexParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>) -> RegexError {
        RegexError {
            position: self.pos,
            message: message.into(),
        }
    }

    fn union(&mut self) -> Result<RegexFormula, RegexError> {
        let mut r = self.concat()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            let s = self.concat()?;
            r = RegexFormula::Union(Box::new(r), Box::new(s));
        }
        Ok(r)
    }

    fn concat(&mut self) -> Result<RegexFormula, RegexError> {
        let mut parts: Vec<RegexFormula> = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' || c == '}' {
                break;
            }
            parts.push(self.postfix()?);
        }
        Ok(parts
            .into_iter()
            .reduce(|a, b| RegexFormula::Concat(Box::new(a), Box::new(b)))
            .unwrap_or(RegexFormula::Eps))
    }

    fn postfix(&mut self) -> Result<RegexFormula, RegexError> {
        let mut r = self.atom()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    r = RegexFormula::Star(Box::new(r));
                }
                Some('+') => {
                    self.pos += 1;
                    r = RegexFormula::Concat(
                        Box::new(r.clone()),
                        Box::new(RegexFormula::Star(Box::new(r))),
                    );
                }
                _ => return Ok(r),
            }
        }
    }

    fn binding_name(&self) -> Option<String> {
        if !self.bindings {
            return None;
        }
        let mut end = self.pos;
        while end < self.chars.len()
            && (self.chars[end].is_ascii_alphanumeric() || self.chars[end] == '_')
        {
            end += 1;
        }
        if end > self.pos && self.chars.get(end) == Some(&'{') {
            Some(self.chars[self.pos..end].iter().collect())
        } else {
            None
        }
    }

    fn atom(&mut self) -> Result<RegexFormula, RegexError> {
        let c = self.peek().ok_or_else(|| self.err("unexpected end"))?;
        if let Some(name) = self.binding_name() {
            self.pos += name.chars().count() + 1;
            let body = self.union()?;
            if self.peek() != Some('}') {
                return Err(self.err("expected `}`"));
            }
            self.pos += 1;
            return Ok(RegexFormula::Bind(name, Box::new(body)));
        }
        match c {
            '(' => {
                self.pos += 1;
                let r = self.union()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(r)
            }
            '\\' => {
                let e = *self
                    .chars
                    .get(self.pos + 1)
                    .ok_or_else(|| self.err("dangling backslash"))?;
                self.pos += 2;
                Ok(if e == '0' {
                    RegexFormula::Empty
                } else {
                    RegexFormula::Letter(e)
                })
            }
            'S' => {
                self.pos += 1;
                Ok(RegexFormula::Sigma)
            }
            '*' | '+' => Err(self.err(format!("`{c}` has nothing to repeat"))),
            // a slash reaches this point only after the formula lexer removed
            // its escape
            c if META.contains(&c) && c != '/' => Err(self.err(format!("unexpected `{c}`"))),
            c => {
                self.pos += 1;
                Ok(RegexFormula::Letter(c))
            }
        }
    }
}

/// Parses regex source, optionally with `x{...}` variable bindings.
pub(crate) fn parse_tree(text: &str, bindings: bool) -> Result<RegexFormula, RegexError> {
    let chars: Vec<char> = text.chars().collect();
    let mut p = RegexParser {
        chars: &chars,
        pos: 0,
        bindings,
    };
    let r = p.union()?;
    if let Some(c) = p.peek() {
        return Err(p.err(format!("unexpected `{c}`")));
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// matcher

#[derive(Debug, Clone)]
enum State {
    Match,
    Dead,
    Char(char, usize),
    Any(usize),
    Split(usize, usize),
}

/// Thompson automaton with anchored full-match semantics.
#[derive(Debug, Clone)]
pub struct Matcher {
    states: Vec<State>,
    start: usize,
}

impl Matcher {
    pub fn new(r: &Regex) -> Self {
        let mut states = vec![State::Match];
        let start = Self::build(r, 0, &mut states);
        Self { states, start }
    }

    fn build(r: &Regex, next: usize, states: &mut Vec<State>) -> usize {
        let push = |s: State, states: &mut Vec<State>| {
            states.push(s);
            states.len() - 1
        };
        match r {
            Regex::Empty => push(State::Dead, states),
            Regex::Eps => next,
            Regex::Letter(c) => push(State::Char(*c, next), states),
            Regex::Sigma => push(State::Any(next), states),
            Regex::Concat(a, b) => {
                let mid = Self::build(b, next, states);
                Self::build(a, mid, states)
            }
            Regex::Union(a, b) => {
                let x = Self::build(a, next, states);
                let y = Self::build(b, next, states);
                push(State::Split(x, y), states)
            }
            Regex::Star(a) => {
                let split = push(State::Split(usize::MAX, next), states);
                let body = Self::build(a, split, states);
                states[split] = State::Split(body, next);
                split
            }
        }
    }

    fn close(&self, set: &mut Vec<usize>, seen: &mut [bool], s: usize) {
        let mut stack = vec![s];
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            match self.states[s] {
                State::Split(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                _ => set.push(s),
            }
        }
    }

    /// For each prefix length `l` of `s`, whether `s[..l]` is in the language.
    pub fn accepting_prefixes(&self, s: &[char]) -> Vec<bool> {
        let mut out = vec![false; s.len() + 1];
        let mut seen = vec![false; self.states.len()];
        let mut cur = Vec::new();
        self.close(&mut cur, &mut seen, self.start);
        for (i, &c) in s.iter().enumerate() {
            if cur.is_empty() {
                return out;
            }
            out[i] = cur.iter().any(|&st| matches!(self.states[st], State::Match));
            seen.iter_mut().for_each(|b| *b = false);
            let mut next = Vec::new();
            for &st in &cur {
                match self.states[st] {
                    State::Char(d, n) if d == c => self.close(&mut next, &mut seen, n),
                    State::Any(n) => self.close(&mut next, &mut seen, n),
                    _ => {}
                }
            }
            cur = next;
        }
        out[s.len()] = cur.iter().any(|&st| matches!(self.states[st], State::Match));
        out
    }

    pub fn matches(&self, s: &[char]) -> bool {
        self.accepting_prefixes(s)[s.len()]
    }
}

/// Whether `v` is in the language of `r`.
pub fn match_full(r: &Regex, v: &str) -> bool {
    let s: Vec<char> = v.chars().collect();
    r.compile().matches(&s)
}

// ---------------------------------------------------------------------------
// simple regexes

/// Whether every star applies to a terminal word or to Σ.
pub fn is_simple(r: &Regex) -> bool {
    match r {
        Regex::Empty | Regex::Eps | Regex::Letter(_) | Regex::Sigma => true,
        Regex::Concat(a, b) | Regex::Union(a, b) => is_simple(a) && is_simple(b),
        Regex::Star(a) => **a == Regex::Sigma || a.as_word().is_some(),
    }
}

/// The primitive root ϱ of a non-empty word and the exponent p with s = ϱ^p.
pub fn root(s: &[char]) -> Result<(Vec<char>, usize), RegexLangError> {
    let n = s.len();
    if n == 0 {
        return Err(RegexLangError::EmptyRoot);
    }
    let l = (1..=n)
        .find(|&l| n % l == 0 && (l..n).all(|i| s[i] == s[i - l]))
        .expect("l = n always qualifies");
    Ok((s[..l].to_vec(), n / l))
}

/// Picks `k` names from a small reusable pool, none equal to `avoid`. Names in
/// the translations below only need to differ from the one variable that is
/// free at that point, which keeps the width constant.
fn pool_names(avoid: &[&str], k: usize) -> Vec<String> {
    (1..)
        .map(|i| format!("_r{i}"))
        .filter(|n| !avoid.contains(&n.as_str()))
        .take(k)
        .collect()
}

/// An existential-positive FC formula with free variable `x` satisfied exactly
/// when `x` is in the language of `r` (and, as always, a factor of `u`).
pub fn simple_to_fc(r: &Regex, x: &str, sigma: &Alphabet) -> Result<Formula, RegexLangError> {
    if !is_simple(r) {
        return Err(RegexLangError::NotSimple(r.to_string()));
    }
    Ok(simple_rec(r, x, sigma))
}

fn simple_rec(r: &Regex, x: &str, sigma: &Alphabet) -> Formula {
    if let Some(w) = r.as_word() {
        return Formula::eq(x, Pattern::from_terms([Term::Lit(w)]));
    }
    match r {
        Regex::Empty => {
            let mut p = Pattern::from_terms([Term::Lit(vec![sigma.first()])]);
            p.push_var(x);
            Formula::eq(x, p)
        }
        Regex::Sigma => Formula::or_all(
            sigma
                .letters()
                .map(|a| Formula::eq(x, Pattern::from_terms([Term::Lit(vec![a])]))),
        ),
        Regex::Union(a, b) => Formula::or(simple_rec(a, x, sigma), simple_rec(b, x, sigma)),
        Regex::Concat(..) => concat_rec(&flatten_concat(r), x, sigma),
        Regex::Star(a) if **a == Regex::Sigma => Formula::eq(x, Pattern::var(x)),
        Regex::Star(a) => {
            let s = a.as_word().expect("simple star over a word");
            star_of_word(&s, x)
        }
        Regex::Eps | Regex::Letter(_) => unreachable!("handled as words"),
    }
}

/// `x ∈ s*` for a terminal word s.
fn star_of_word(s: &[char], x: &str) -> Formula {
    let lit = |w: &[char]| Term::Lit(w.to_vec());
    if s.is_empty() {
        return Formula::eq(x, Pattern::new());
    }
    let (rho, p) = root(s).expect("non-empty");
    let names = pool_names(&[x], 2);
    let (y, z) = (&names[0], &names[1]);
    let psi = if p == 1 {
        let mut ys = Pattern::var(y);
        ys.push(lit(s));
        let mut sy = Pattern::from_terms([lit(s)]);
        sy.push_var(y);
        Formula::exists(y, Formula::and(Formula::eq(x, ys), Formula::eq(x, sy)))
    } else {
        let power = Pattern::vars(&vec![y.as_str(); p]);
        let mut y_rho = Pattern::var(y);
        y_rho.push(lit(&rho));
        let mut rho_y = Pattern::from_terms([lit(&rho)]);
        rho_y.push_var(y);
        Formula::exists_all(
            &[y, z],
            Formula::and_all([
                Formula::eq(x, power),
                Formula::eq(z, y_rho),
                Formula::eq(z, rho_y),
            ]),
        )
    };
    Formula::or_all([
        Formula::eq(x, Pattern::new()),
        Formula::eq(x, Pattern::from_terms([lit(s)])),
        psi,
    ])
}

fn flatten_concat(r: &Regex) -> Vec<&Regex> {
    match r {
        Regex::Concat(a, b) => {
            let mut v = flatten_concat(a);
            v.extend(flatten_concat(b));
            v
        }
        r => vec![r],
    }
}

/// Concatenation: terminal parts go straight into the equation, every other
/// part gets its own variable, two at a time so the width stays at three.
fn concat_rec(parts: &[&Regex], x: &str, sigma: &Alphabet) -> Formula {
    let mut prefix = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        match parts[i].as_word() {
            Some(w) => prefix.extend(w),
            None => break,
        }
        i += 1;
    }
    if i == parts.len() {
        return Formula::eq(x, Pattern::from_terms([Term::Lit(prefix)]));
    }
    let first = parts[i];
    let rest = &parts[i + 1..];
    let names = pool_names(&[x], 2);
    let (x1, x2) = (&names[0], &names[1]);
    if let Some(suffix) = rest
        .iter()
        .map(|p| p.as_word())
        .collect::<Option<Vec<_>>>()
    {
        let mut pat = Pattern::from_terms([Term::Lit(prefix)]);
        pat.push_var(x1);
        pat.push(Term::Lit(suffix.concat()));
        return Formula::exists(
            x1,
            Formula::and(Formula::eq(x, pat), simple_rec(first, x1, sigma)),
        );
    }
    let mut pat = Pattern::from_terms([Term::Lit(prefix)]);
    pat.push_var(x1);
    pat.push_var(x2);
    Formula::exists_all(
        &[x1, x2],
        Formula::and_all([
            Formula::eq(x, pat),
            simple_rec(first, x1, sigma),
            concat_rec(rest, x2, sigma),
        ]),
    )
}

// ---------------------------------------------------------------------------
// regex patterns and regex equations

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RegexItem {
    Var(String),
    Regex(Regex),
}

/// A sequence of variables and regular expressions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RegexPattern {
    pub items: Vec<RegexItem>,
}

impl RegexPattern {
    pub fn new(items: Vec<RegexItem>) -> Self {
        Self { items }
    }

    /// Parses a sequence of variables, quoted words, and `/regex/` items,
    /// e.g. `x /ab*a/ y`.
    pub fn parse(text: &str) -> Result<Self, RegexLangError> {
        let toks = syntax::tokenize(text)?;
        let mut items = Vec::new();
        for t in toks {
            match t.tok {
                Tok::Ident(v) => items.push(RegexItem::Var(v)),
                Tok::Str(s) => items.push(RegexItem::Regex(Regex::word(
                    &s.into_iter().collect::<String>(),
                ))),
                Tok::Regex(src) => items.push(RegexItem::Regex(Regex::parse(&src)?)),
                Tok::Eof => break,
                other => {
                    return Err(RegexLangError::Syntax(syntax::SyntaxError::Syntax {
                        line: t.line,
                        col: t.col,
                        message: format!("unexpected {other} in a regex pattern"),
                    }))
                }
            }
        }
        Ok(Self { items })
    }

    pub fn is_simple(&self) -> bool {
        self.items.iter().all(|i| match i {
            RegexItem::Var(_) => true,
            RegexItem::Regex(r) => is_simple(r),
        })
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for i in &self.items {
            if let RegexItem::Var(v) = i {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for RegexPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.items.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            match i {
                RegexItem::Var(v) => write!(f, "{v}")?,
                RegexItem::Regex(r) => write!(f, "/{r}/")?,
            }
        }
        Ok(())
    }
}

/// The defining formula `∃y1..yn: (x = y1..yn ∧ yi ∈ αi ∧ yj = αj)` of the regex
/// equation `x = α`.
pub fn regex_equation_definition(x: &str, alpha: &RegexPattern) -> Formula {
    let mut fresh = FreshNames::new(
        alpha
            .variables()
            .into_iter()
            .chain([x])
            .map(String::from),
    );
    let ys: Vec<String> = (0..alpha.items.len()).map(|_| fresh.fresh("y")).collect();
    let mut parts = vec![Formula::eq(x, Pattern::vars(&ys))];
    for (y, item) in ys.iter().zip(&alpha.items) {
        parts.push(match item {
            RegexItem::Var(v) => Formula::eq(y, Pattern::var(v)),
            RegexItem::Regex(r) => Formula::constraint(y, r.clone()),
        });
    }
    Formula::exists_all(&ys, Formula::and_all(parts))
}

/// A width-bounded formula equivalent to `∃q⃗: x = α`, where `q⃗` are the
/// variables in `quantified`. The pattern is consumed left to right through a
/// chain of two alternating remainder variables, so the width exceeds the
/// number of free variables by at most three. With `sigma` given and a simple
/// pattern, constraints are replaced by their existential-positive FC
/// translation.
pub fn expand_regex_equation(
    x: &str,
    alpha: &RegexPattern,
    quantified: &[String],
    sigma: Option<&Alphabet>,
) -> Result<Formula, RegexLangError> {
    if let Some(_s) = sigma {
        if !alpha.is_simple() {
            return Err(RegexLangError::NotSimple(alpha.to_string()));
        }
    }
    let occurrences = |v: &str| {
        alpha
            .items
            .iter()
            .filter(|i| matches!(i, RegexItem::Var(w) if w == v))
            .count()
            + usize::from(x == v)
    };
    // quantified variables used once are bound right where they are consumed
    let local: Vec<&str> = quantified
        .iter()
        .map(String::as_str)
        .filter(|v| occurrences(v) == 1 && *v != x)
        .collect();
    let outer: Vec<&String> = quantified
        .iter()
        .filter(|v| !local.contains(&v.as_str()) && occurrences(v) > 0)
        .collect();

    let mut fresh = FreshNames::new(
        alpha
            .variables()
            .into_iter()
            .chain([x])
            .chain(quantified.iter().map(String::as_str))
            .map(String::from),
    );
    let y = fresh.fresh("y");
    let z = [fresh.fresh("z1"), fresh.fresh("z2")];

    let constrain = |var: &str, r: &Regex| -> Formula {
        match sigma {
            Some(s) => simple_rec(r, var, s),
            None => Formula::constraint(var, r.clone()),
        }
    };
    let bind_local = |v: &str, f: Formula| -> Formula {
        if local.contains(&v) {
            Formula::exists(v, f)
        } else {
            f
        }
    };

    let n = alpha.items.len();
    let body = if n == 0 {
        Formula::eq(x, Pattern::new())
    } else {
        // build from the last item backwards; `cur(i)` is the variable holding
        // the remainder α_i … α_n
        let cur = |i: usize| -> String {
            if i == 0 {
                x.to_string()
            } else {
                z[(i - 1) % 2].clone()
            }
        };
        let mut acc = match &alpha.items[n - 1] {
            RegexItem::Var(v) => bind_local(v, Formula::eq(&cur(n - 1), Pattern::var(v))),
            RegexItem::Regex(r) => constrain(&cur(n - 1), r),
        };
        for i in (0..n - 1).rev() {
            let here = cur(i);
            let next = cur(i + 1);
            acc = match &alpha.items[i] {
                RegexItem::Var(v) => {
                    let eq = Formula::eq(&here, Pattern::vars(&[v.as_str(), next.as_str()]));
                    let f = Formula::exists(&next, Formula::and(eq, acc));
                    bind_local(v, f)
                }
                RegexItem::Regex(r) => {
                    let eq = Formula::eq(&here, Pattern::vars(&[y.as_str(), next.as_str()]));
                    Formula::exists_all(
                        &[y.as_str(), next.as_str()],
                        Formula::and_all([eq, constrain(&y, r), acc]),
                    )
                }
            };
        }
        acc
    };
    Ok(Formula::exists_all(&outer, body))
}

// ---------------------------------------------------------------------------
// star-free expressions

/// Star-free expressions: ∅, letters, concatenation, union, and complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StarFree {
    Empty,
    Letter(char),
    Concat(Box<StarFree>, Box<StarFree>),
    Union(Box<StarFree>, Box<StarFree>),
    Complement(Box<StarFree>),
}

impl StarFree {
    pub fn concat(a: StarFree, b: StarFree) -> Self {
        StarFree::Concat(Box::new(a), Box::new(b))
    }

    pub fn union(a: StarFree, b: StarFree) -> Self {
        StarFree::Union(Box::new(a), Box::new(b))
    }

    pub fn complement(a: StarFree) -> Self {
        StarFree::Complement(Box::new(a))
    }
}

/// The sentence `∃x: (u = x ∧ ψ(x))` defining the language of a star-free
/// expression.
pub fn star_free_to_fc(e: &StarFree) -> Formula {
    let x = "_r1";
    Formula::exists(
        x,
        Formula::and(Formula::eq(syntax::UNIVERSE, Pattern::var(x)), star_free_rec(e, x)),
    )
}

fn star_free_rec(e: &StarFree, x: &str) -> Formula {
    match e {
        StarFree::Empty => Formula::not(Formula::eq(x, Pattern::var(x))),
        StarFree::Letter(a) => Formula::eq(x, Pattern::from_terms([Term::Lit(vec![*a])])),
        StarFree::Concat(a, b) => {
            let names = pool_names(&[x], 2);
            Formula::exists_all(
                &names,
                Formula::and_all([
                    Formula::eq(x, Pattern::vars(&names)),
                    star_free_rec(a, &names[0]),
                    star_free_rec(b, &names[1]),
                ]),
            )
        }
        StarFree::Union(a, b) => Formula::or(star_free_rec(a, x), star_free_rec(b, x)),
        StarFree::Complement(a) => Formula::not(star_free_rec(a, x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(s: &str) -> Regex {
        Regex::parse(s).unwrap()
    }

    #[test]
    fn match_examples() {
        assert!(match_full(&re("(ab)*"), "abab"));
        assert!(!match_full(&re("(ab)*"), "aba"));
        assert!(!match_full(&re("\\0"), ""));
        assert!(!match_full(&re("\\0"), "a"));
        assert!(match_full(&re("S*"), "abba"));
        assert!(match_full(&re("S*"), ""));
        assert!(match_full(&re("a+b"), "aab"));
        assert!(!match_full(&re("a+b"), "b"));
        assert!(match_full(&re("()*"), ""));
    }

    #[test]
    fn accepting_prefixes_marks_all_lengths() {
        let m = re("a*").compile();
        assert_eq!(m.accepting_prefixes(&['a', 'a', 'b', 'a']), vec![true, true, true, false, false]);
    }

    #[test]
    fn simple_examples() {
        assert!(is_simple(&re("(abc)*S*")));
        assert!(!is_simple(&re("(a|b)*")));
        assert!(!is_simple(&re("(ab*)*")));
        assert!(is_simple(&re("ab*a")));
        assert!(!is_simple(&re("\\0*")));
    }

    #[test]
    fn root_examples() {
        let w = |s: &str| s.chars().collect::<Vec<_>>();
        assert_eq!(root(&w("abab")).unwrap(), (w("ab"), 2));
        assert_eq!(root(&w("aaa")).unwrap(), (w("a"), 3));
        assert_eq!(root(&w("abc")).unwrap(), (w("abc"), 1));
        assert_eq!(root(&[]), Err(RegexLangError::EmptyRoot));
    }

    #[test]
    fn printer_round_trips() {
        for s in ["(ab)*S*", "a|b|c", "a(b|c)d*", "\\S\\(x", "()|\\0", "(a*)*", "a(bc)"] {
            let r = re(s);
            assert_eq!(re(&r.to_string()), r, "{s} -> {r}");
        }
        let r = Regex::union(re("a"), Regex::union(re("b"), re("c")));
        assert_eq!(re(&r.to_string()), r);
    }

    #[test]
    fn simple_to_fc_shapes() {
        let sigma = Alphabet::parse("ab").unwrap();
        assert_eq!(
            simple_to_fc(&Regex::Empty, "x", &sigma).unwrap().to_string(),
            r#"x = "a" x"#
        );
        assert_eq!(
            simple_to_fc(&re("a"), "x", &sigma).unwrap().to_string(),
            r#"x = "a""#
        );
        assert_eq!(simple_to_fc(&re("S*"), "x", &sigma).unwrap().to_string(), "x = x");
        assert!(simple_to_fc(&re("(a|b)*"), "x", &sigma).is_err());
        let f = simple_to_fc(&re("(abab)*"), "x", &sigma).unwrap();
        assert!(syntax::classify(&f).is_ep());
        assert_eq!(syntax::width(&f), 3);
    }

    #[test]
    fn example_a3_width() {
        let alpha = RegexPattern::parse("x /ab*a/ y").unwrap();
        let f = expand_regex_equation("u", &alpha, &["x".into(), "y".into()], None).unwrap();
        assert!(syntax::free_vars(&f).is_empty());
        assert_eq!(syntax::width(&f), 3);
        let sigma = Alphabet::parse("ab").unwrap();
        let g = expand_regex_equation("u", &alpha, &["x".into(), "y".into()], Some(&sigma)).unwrap();
        assert!(syntax::classify(&g).is_ep() && syntax::classify(&g).is_plain_fc());
        assert_eq!(syntax::width(&g), 3);
    }

    #[test]
    fn single_variable_collapses() {
        let alpha = RegexPattern::parse("y").unwrap();
        let f = expand_regex_equation("x", &alpha, &[], None).unwrap();
        assert_eq!(f.to_string(), "x = y");
    }
}
