//! Translations between FC and neighbouring logics.
//!
//! - FO[Eq]: first-order logic over the positions `1..=|w|+1` of a word, with
//!   letter predicates `Pa`, `<`, `succ`, the 4-ary factor equality `Eq`, and
//!   the constants `min` and `max`. Position `|w|+1` carries no letter.
//! - C: word equations over all of Σ*. [`fc_to_c_guarded`] adds guards so the
//!   result means the same under both semantics.
//!
//! An FC variable `x` is represented in FO[Eq] by the pair `x_o`, `x_c` with
//! `σ(x) = w[x_o, x_c)`. An FO[Eq] variable `x` is represented in FC by the
//! prefix of length `x - 1`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::syntax::{
    free_vars, is_universe, tokenize, Cursor, Formula, FreshNames, Pattern, SyntaxError, Term,
    Tok, UNIVERSE,
};
use crate::eval::{eval_relation, Engine, EvalConfig, EvalError};
use crate::word::{Alphabet, FactorIndex, FactorRef, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("cannot translate `{0}`: only word equations, connectives and quantifiers are supported")]
    Unsupported(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, BridgeError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FoTerm {
    Var(String),
    Min,
    Max,
}

impl FoTerm {
    pub fn var(v: &str) -> Self {
        FoTerm::Var(v.to_string())
    }
}

impl fmt::Display for FoTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoTerm::Var(v) => write!(f, "{v}"),
            FoTerm::Min => write!(f, "min"),
            FoTerm::Max => write!(f, "max"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FoEqFormula {
    /// `P_a(t)`
    Letter(char, FoTerm),
    Less(FoTerm, FoTerm),
    Succ(FoTerm, FoTerm),
    /// `Eq(i₁, j₁, i₂, j₂)`: `i₁ ≤ j₁`, `i₂ ≤ j₂`, and `w[i₁, j₁) = w[i₂, j₂)`.
    Eq([FoTerm; 4]),
    Equal(FoTerm, FoTerm),
    And(Box<FoEqFormula>, Box<FoEqFormula>),
    Or(Box<FoEqFormula>, Box<FoEqFormula>),
    Not(Box<FoEqFormula>),
    Exists(String, Box<FoEqFormula>),
    Forall(String, Box<FoEqFormula>),
}

impl FoEqFormula {
    pub fn and(a: Self, b: Self) -> Self {
        FoEqFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        FoEqFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: Self) -> Self {
        FoEqFormula::Not(Box::new(a))
    }

    pub fn exists(v: &str, a: Self) -> Self {
        FoEqFormula::Exists(v.to_string(), Box::new(a))
    }

    pub fn forall(v: &str, a: Self) -> Self {
        FoEqFormula::Forall(v.to_string(), Box::new(a))
    }

    /// `s ≤ t` as `s < t ∨ s = t`.
    pub fn less_eq(s: FoTerm, t: FoTerm) -> Self {
        Self::or(FoEqFormula::Less(s.clone(), t.clone()), FoEqFormula::Equal(s, t))
    }

    /// Left-nested conjunction; `None` for no parts.
    pub fn and_all<I: IntoIterator<Item = Self>>(parts: I) -> Option<Self> {
        parts.into_iter().reduce(Self::and)
    }

    pub fn is_atom(&self) -> bool {
        matches!(
            self,
            FoEqFormula::Letter(..)
                | FoEqFormula::Less(..)
                | FoEqFormula::Succ(..)
                | FoEqFormula::Eq(_)
                | FoEqFormula::Equal(..)
        )
    }

    fn terms(&self) -> Vec<&FoTerm> {
        match self {
            FoEqFormula::Letter(_, t) => vec![t],
            FoEqFormula::Less(a, b) | FoEqFormula::Succ(a, b) | FoEqFormula::Equal(a, b) => {
                vec![a, b]
            }
            FoEqFormula::Eq(ts) => ts.iter().collect(),
            _ => Vec::new(),
        }
    }

    fn children(&self) -> Vec<&FoEqFormula> {
        match self {
            FoEqFormula::And(a, b) | FoEqFormula::Or(a, b) => vec![a, b],
            FoEqFormula::Not(a) | FoEqFormula::Exists(_, a) | FoEqFormula::Forall(_, a) => vec![a],
            _ => Vec::new(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            FoEqFormula::Exists(v, a) | FoEqFormula::Forall(v, a) => {
                let mut s = a.free_vars();
                s.remove(v);
                s
            }
            _ if self.is_atom() => self
                .terms()
                .into_iter()
                .filter_map(|t| match t {
                    FoTerm::Var(v) => Some(v.clone()),
                    _ => None,
                })
                .collect(),
            _ => self.children().into_iter().flat_map(|c| c.free_vars()).collect(),
        }
    }

    /// Every variable name, bound or free.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = self.free_vars();
        if let FoEqFormula::Exists(v, _) | FoEqFormula::Forall(v, _) = self {
            out.insert(v.clone());
        }
        for c in self.children() {
            out.extend(c.all_vars());
        }
        out
    }

    /// Maximum number of free variables of any subformula.
    pub fn width(&self) -> usize {
        self.children()
            .into_iter()
            .map(Self::width)
            .fold(self.free_vars().len(), usize::max)
    }

    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Self::size).sum::<usize>()
    }

    /// Neither negation nor universal quantifiers.
    pub fn is_ep(&self) -> bool {
        !matches!(self, FoEqFormula::Not(_) | FoEqFormula::Forall(..))
            && self.children().into_iter().all(Self::is_ep)
    }

    /// No universal quantifiers, negation only on atoms.
    pub fn is_existential(&self) -> bool {
        match self {
            FoEqFormula::Forall(..) => false,
            FoEqFormula::Not(a) => a.is_atom(),
            _ => self.children().into_iter().all(Self::is_existential),
        }
    }
}

// ---------------------------------------------------------------------------
// printer

fn letter_name(c: char) -> String {
    if c.is_ascii_alphanumeric() {
        format!("P{c}")
    } else {
        format!("P\"{c}\"")
    }
}

fn write_fo(f: &mut fmt::Formatter<'_>, node: &FoEqFormula, wrap: bool) -> fmt::Result {
    let compound = matches!(
        node,
        FoEqFormula::And(..) | FoEqFormula::Or(..) | FoEqFormula::Exists(..) | FoEqFormula::Forall(..)
    );
    if wrap && compound {
        write!(f, "(")?;
        write_fo(f, node, false)?;
        return write!(f, ")");
    }
    match node {
        FoEqFormula::Letter(c, t) => write!(f, "{}({t})", letter_name(*c)),
        FoEqFormula::Less(a, b) => write!(f, "{a} < {b}"),
        FoEqFormula::Succ(a, b) => write!(f, "succ({a}, {b})"),
        FoEqFormula::Eq([a, b, c, d]) => write!(f, "Eq({a}, {b}, {c}, {d})"),
        FoEqFormula::Equal(a, b) => write!(f, "{a} = {b}"),
        FoEqFormula::And(a, b) | FoEqFormula::Or(a, b) => {
            let (op, same): (&str, fn(&FoEqFormula) -> bool) = match node {
                FoEqFormula::And(..) => (" & ", |n| matches!(n, FoEqFormula::And(..))),
                _ => (" | ", |n| matches!(n, FoEqFormula::Or(..))),
            };
            write_fo(f, a, !same(a))?;
            write!(f, "{op}")?;
            write_fo(f, b, true)
        }
        FoEqFormula::Not(a) => {
            write!(f, "!")?;
            write_fo(f, a, true)
        }
        FoEqFormula::Exists(v, a) | FoEqFormula::Forall(v, a) => {
            let kw = if matches!(node, FoEqFormula::Exists(..)) { "exists" } else { "forall" };
            write!(f, "{kw} {v}: ")?;
            write_fo(f, a, false)
        }
    }
}

impl fmt::Display for FoEqFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_fo(f, self, false)
    }
}

// ---------------------------------------------------------------------------
// parser

struct FoParser {
    cur: Cursor,
}

impl FoParser {
    fn formula(&mut self) -> Result<FoEqFormula> {
        if self.cur.at_keyword("exists") || self.cur.at_keyword("forall") {
            return self.quantifier();
        }
        let mut f = self.conjunction()?;
        while self.cur.eat_sym('|') {
            f = FoEqFormula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn quantifier(&mut self) -> Result<FoEqFormula> {
        let exists = self.cur.at_keyword("exists");
        self.cur.next();
        let mut vars = Vec::new();
        loop {
            vars.push(self.variable()?);
            if !self.cur.eat_sym(',') {
                break;
            }
        }
        self.cur.expect_sym(':')?;
        let body = self.formula()?;
        Ok(vars.iter().rev().fold(body, |acc, v| {
            if exists {
                FoEqFormula::exists(v, acc)
            } else {
                FoEqFormula::forall(v, acc)
            }
        }))
    }

    fn conjunction(&mut self) -> Result<FoEqFormula> {
        let mut f = self.unary()?;
        while self.cur.eat_sym('&') {
            f = FoEqFormula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<FoEqFormula> {
        if self.cur.eat_sym('!') {
            return Ok(FoEqFormula::not(self.unary()?));
        }
        if self.cur.at_keyword("exists") || self.cur.at_keyword("forall") {
            return self.quantifier();
        }
        if self.cur.eat_sym('(') {
            let f = self.formula()?;
            self.cur.expect_sym(')')?;
            return Ok(f);
        }
        self.atom()
    }

    fn variable(&mut self) -> Result<String> {
        if self.cur.at_keyword("min") || self.cur.at_keyword("max") {
            return Err(self.cur.unexpected("a variable").into());
        }
        Ok(self.cur.expect_ident()?.0)
    }

    fn term(&mut self) -> Result<FoTerm> {
        if self.cur.at_keyword("min") {
            self.cur.next();
            return Ok(FoTerm::Min);
        }
        if self.cur.at_keyword("max") {
            self.cur.next();
            return Ok(FoTerm::Max);
        }
        Ok(FoTerm::Var(self.cur.expect_ident()?.0))
    }

    fn args(&mut self, n: usize) -> Result<Vec<FoTerm>> {
        self.cur.expect_sym('(')?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                self.cur.expect_sym(',')?;
            }
            out.push(self.term()?);
        }
        self.cur.expect_sym(')')?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<FoEqFormula> {
        let tok = self.cur.peek().tok.clone();
        if let Tok::Ident(name) = &tok {
            if *self.cur.peek_at(1) == Tok::Sym('(') || name == "P" {
                if name == "succ" {
                    self.cur.next();
                    let a = self.args(2)?;
                    return Ok(FoEqFormula::Succ(a[0].clone(), a[1].clone()));
                }
                if name == "Eq" {
                    self.cur.next();
                    let a = self.args(4)?;
                    let [p, q, r, s]: [FoTerm; 4] = a.try_into().expect("four arguments");
                    return Ok(FoEqFormula::Eq([p, q, r, s]));
                }
                let mut chars = name.chars();
                if chars.next() == Some('P') {
                    let rest: Vec<char> = chars.collect();
                    let letter = match rest.as_slice() {
                        [c] => Some(*c),
                        [] => {
                            self.cur.next();
                            match self.cur.peek().tok.clone() {
                                Tok::Str(s) if s.len() == 1 => Some(s[0]),
                                _ => return Err(self.cur.unexpected("a one-letter string").into()),
                            }
                        }
                        _ => None,
                    };
                    if let Some(c) = letter {
                        self.cur.next();
                        let a = self.args(1)?;
                        return Ok(FoEqFormula::Letter(c, a[0].clone()));
                    }
                }
                return Err(self.cur.error(format!("unknown predicate `{name}`")).into());
            }
        }
        let a = self.term()?;
        if self.cur.eat_sym('<') {
            let strict = !self.cur.eat_sym('=');
            let b = self.term()?;
            return Ok(if strict {
                FoEqFormula::Less(a, b)
            } else {
                FoEqFormula::less_eq(a, b)
            });
        }
        if self.cur.eat_sym('=') {
            return Ok(FoEqFormula::Equal(a, self.term()?));
        }
        Err(self.cur.unexpected("`<`, `<=`, or `=`").into())
    }
}

/// Parses FO[Eq] surface syntax: `Pa(x)`, `P"#"(x)`, `x < y`, `x <= y`,
/// `x = y`, `succ(x, y)`, `Eq(x1, y1, x2, y2)`, constants `min` and `max`,
/// with `!`, `&`, `|`, `exists`, `forall` as for FC.
pub fn parse_foeq(text: &str) -> Result<FoEqFormula> {
    let mut p = FoParser {
        cur: Cursor::new(tokenize(text)?),
    };
    let f = p.formula()?;
    if !p.cur.at_eof() {
        return Err(p.cur.unexpected("end of input").into());
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// evaluation

/// The structure `A′_w`: positions `1..=|w|+1`, the last without a letter.
#[derive(Debug, Clone)]
pub struct WordStructure {
    idx: FactorIndex,
}

/// FO variable to position in `1..=|w|+1`.
pub type Assignment = BTreeMap<String, usize>;

impl WordStructure {
    pub fn new(w: &Word) -> Self {
        Self {
            idx: FactorIndex::new(w.clone()),
        }
    }

    pub fn word(&self) -> &Word {
        self.idx.word()
    }

    /// `|w| + 1`
    pub fn size(&self) -> usize {
        self.idx.len() + 1
    }

    pub fn letter(&self, i: usize) -> Option<char> {
        self.idx.word().symbols().get(i.wrapping_sub(1)).copied()
    }

    /// `Eq(i₁, j₁, i₂, j₂)`, answered by the equality oracle.
    pub fn factor_eq(&self, i1: usize, j1: usize, i2: usize, j2: usize) -> bool {
        i1 <= j1
            && i2 <= j2
            && self
                .idx
                .factor_eq(FactorRef::new(i1, j1 - i1), FactorRef::new(i2, j2 - i2))
    }

    fn value(&self, t: &FoTerm, env: &HashMap<String, usize>) -> usize {
        match t {
            FoTerm::Min => 1,
            FoTerm::Max => self.size(),
            FoTerm::Var(v) => env[v],
        }
    }

    fn holds(&self, f: &FoEqFormula, env: &mut HashMap<String, usize>) -> bool {
        match f {
            FoEqFormula::Letter(c, t) => self.letter(self.value(t, env)) == Some(*c),
            FoEqFormula::Less(a, b) => self.value(a, env) < self.value(b, env),
            FoEqFormula::Succ(a, b) => {
                let (i, j) = (self.value(a, env), self.value(b, env));
                j == i + 1
            }
            FoEqFormula::Equal(a, b) => self.value(a, env) == self.value(b, env),
            FoEqFormula::Eq([a, b, c, d]) => self.factor_eq(
                self.value(a, env),
                self.value(b, env),
                self.value(c, env),
                self.value(d, env),
            ),
            FoEqFormula::And(a, b) => self.holds(a, env) && self.holds(b, env),
            FoEqFormula::Or(a, b) => self.holds(a, env) || self.holds(b, env),
            FoEqFormula::Not(a) => !self.holds(a, env),
            FoEqFormula::Exists(v, a) | FoEqFormula::Forall(v, a) => {
                let want = matches!(f, FoEqFormula::Exists(..));
                let saved = env.get(v).copied();
                let mut result = !want;
                for i in 1..=self.size() {
                    env.insert(v.clone(), i);
                    if self.holds(a, env) == want {
                        result = want;
                        break;
                    }
                }
                match saved {
                    Some(i) => env.insert(v.clone(), i),
                    None => env.remove(v),
                };
                result
            }
        }
    }

    pub fn satisfies(&self, f: &FoEqFormula, alpha: &Assignment) -> Result<bool> {
        if let Some(v) = f.free_vars().into_iter().find(|v| !alpha.contains_key(v)) {
            return Err(BridgeError::UnboundVariable(v));
        }
        let mut env: HashMap<String, usize> = alpha.iter().map(|(k, &v)| (k.clone(), v)).collect();
        Ok(self.holds(f, &mut env))
    }
}

/// `(w, α) ⊨ φ`
pub fn eval_foeq(f: &FoEqFormula, w: &Word, alpha: &Assignment) -> Result<bool> {
    WordStructure::new(w).satisfies(f, alpha)
}

// ---------------------------------------------------------------------------
// FC to FO[Eq]

pub fn opening(x: &str) -> String {
    format!("{x}_o")
}

pub fn closing(x: &str) -> String {
    format!("{x}_c")
}

fn fo(v: &str) -> FoTerm {
    FoTerm::var(v)
}

struct ToFo {
    /// the two alternating chain variables
    z: [String; 2],
    /// the chain's right end when the left side is not `u`
    last: String,
    /// the dummy variable of the special cases
    spare: String,
    letter: char,
}

impl ToFo {
    fn span_nonneg(x: &str) -> FoEqFormula {
        FoEqFormula::less_eq(fo(&opening(x)), fo(&closing(x)))
    }

    fn empty_span(x: &str) -> FoEqFormula {
        FoEqFormula::Equal(fo(&opening(x)), fo(&closing(x)))
    }

    fn chain_var(&self, i: usize) -> FoTerm {
        fo(&self.z[(i + 1) % 2])
    }

    fn equation(&self, lhs: &str, rhs: &Pattern) -> FoEqFormula {
        let pos = rhs.positions();
        let lhs_u = is_universe(lhs);
        if pos.is_empty() {
            return if lhs_u {
                FoEqFormula::Equal(FoTerm::Min, FoTerm::Max)
            } else {
                Self::empty_span(lhs)
            };
        }
        let u_count = pos.iter().filter(|t| matches!(t, Term::Var(v) if is_universe(v))).count();
        if u_count > 0 {
            if pos.iter().any(|t| matches!(t, Term::Lit(_))) {
                // |σ(η)| > |σ(u)| ≥ |σ(x)|: unsatisfiable
                return FoEqFormula::exists(
                    &self.spare,
                    FoEqFormula::and(
                        FoEqFormula::Letter(self.letter, fo(&self.spare)),
                        FoEqFormula::Equal(fo(&self.spare), FoTerm::Max),
                    ),
                );
            }
            let mut others: BTreeSet<&str> = rhs.variables().into_iter().filter(|v| !is_universe(v)).collect();
            if u_count >= 2 {
                // only the empty word satisfies it
                if !lhs_u {
                    others.insert(lhs);
                }
                let base = FoEqFormula::Equal(FoTerm::Min, FoTerm::Max);
                let body = others
                    .into_iter()
                    .map(Self::empty_span)
                    .fold(base, FoEqFormula::and);
                return FoEqFormula::exists(&self.spare, body);
            }
            let whole = |x: &str| {
                FoEqFormula::and(
                    FoEqFormula::Equal(fo(&opening(x)), FoTerm::Min),
                    FoEqFormula::Equal(fo(&closing(x)), FoTerm::Max),
                )
            };
            if pos.len() == 1 {
                return if lhs_u {
                    FoEqFormula::exists(&self.spare, FoEqFormula::Equal(fo(&self.spare), fo(&self.spare)))
                } else {
                    whole(lhs)
                };
            }
            let empties = others.into_iter().map(Self::empty_span);
            return if lhs_u {
                FoEqFormula::and_all(empties).expect("a variable besides u")
            } else {
                empties.fold(whole(lhs), FoEqFormula::and)
            };
        }
        let n = pos.len();
        let right_end = |i: usize| {
            if i == n + 1 && !lhs_u {
                fo(&self.last)
            } else {
                self.chain_var(i)
            }
        };
        let part = |i: usize| -> FoEqFormula {
            let (a, b) = (self.chain_var(i), right_end(i + 1));
            match &pos[i - 1] {
                Term::Lit(s) => FoEqFormula::and(FoEqFormula::Letter(s[0], a.clone()), FoEqFormula::Succ(a, b)),
                Term::Var(x) => FoEqFormula::Eq([fo(&opening(x)), fo(&closing(x)), a, b]),
            }
        };
        let name = |t: FoTerm| match t {
            FoTerm::Var(v) => v,
            _ => unreachable!("chain positions are variables"),
        };
        let mut inner = if lhs_u {
            FoEqFormula::exists(
                &name(right_end(n + 1)),
                FoEqFormula::and(part(n), FoEqFormula::Equal(right_end(n + 1), FoTerm::Max)),
            )
        } else {
            part(n)
        };
        for i in (1..n).rev() {
            inner = FoEqFormula::exists(&name(self.chain_var(i + 1)), FoEqFormula::and(part(i), inner));
        }
        let first = self.chain_var(1);
        if lhs_u {
            FoEqFormula::exists(
                &name(first.clone()),
                FoEqFormula::and(FoEqFormula::Equal(first, FoTerm::Min), inner),
            )
        } else {
            let anchor = FoEqFormula::Eq([fo(&opening(lhs)), fo(&closing(lhs)), first.clone(), fo(&self.last)]);
            FoEqFormula::exists(
                &name(first),
                FoEqFormula::exists(&self.last, FoEqFormula::and(anchor, inner)),
            )
        }
    }

    fn translate(&self, f: &Formula) -> Result<FoEqFormula> {
        Ok(match f {
            Formula::Eq(eq) => self.equation(&eq.lhs, &eq.rhs),
            Formula::And(a, b) => FoEqFormula::and(self.translate(a)?, self.translate(b)?),
            Formula::Or(a, b) => {
                let (fa, fb) = (free_vars(a), free_vars(b));
                let guard = |psi: FoEqFormula, missing: Vec<&String>| {
                    missing
                        .into_iter()
                        .map(|x| Self::span_nonneg(x))
                        .fold(psi, FoEqFormula::and)
                };
                FoEqFormula::or(
                    guard(self.translate(a)?, fb.difference(&fa).collect()),
                    guard(self.translate(b)?, fa.difference(&fb).collect()),
                )
            }
            Formula::Not(a) => free_vars(a)
                .iter()
                .map(|x| Self::span_nonneg(x))
                .fold(FoEqFormula::not(self.translate(a)?), FoEqFormula::and),
            Formula::Exists(x, a) => {
                FoEqFormula::exists(&opening(x), FoEqFormula::exists(&closing(x), self.translate(a)?))
            }
            Formula::Forall(x, a) => FoEqFormula::forall(
                &opening(x),
                FoEqFormula::forall(
                    &closing(x),
                    FoEqFormula::or(FoEqFormula::Less(fo(&closing(x)), fo(&opening(x))), self.translate(a)?),
                ),
            ),
            other => return Err(BridgeError::Unsupported(other.to_string())),
        })
    }
}

/// Translates plain FC into FO[Eq]. Each free FC variable `x` becomes the free
/// pair `x_o`, `x_c`; a satisfying assignment expresses `σ(x) = w[x_o, x_c)`.
pub fn fc_to_foeq(f: &Formula) -> Result<FoEqFormula> {
    let mut names = FreshNames::new(
        f.all_vars()
            .into_iter()
            .flat_map(|x| [opening(&x), closing(&x)]),
    );
    let letter = first_terminal(f).unwrap_or('a');
    let t = ToFo {
        z: [names.fresh("z"), names.fresh("z")],
        last: names.fresh("y"),
        spare: names.fresh("x"),
        letter,
    };
    t.translate(f)
}

fn first_terminal(f: &Formula) -> Option<char> {
    if let Formula::Eq(eq) = f {
        for t in eq.rhs.items() {
            if let Term::Lit(s) = t {
                return s.first().copied();
            }
        }
    }
    f.children().into_iter().find_map(first_terminal)
}

/// Variable-count bound for the FO[Eq] translation: `2k + 2` when every
/// equation has `u` on the left, `2k + 3` otherwise, where `k` counts the FC
/// variables other than `u`.
pub fn foeq_variable_bound(f: &Formula) -> usize {
    fn all_lhs_u(f: &Formula) -> bool {
        match f {
            Formula::Eq(eq) => is_universe(&eq.lhs),
            _ => f.children().into_iter().all(all_lhs_u),
        }
    }
    let k = f.all_vars().iter().filter(|v| !is_universe(v)).count();
    2 * k + if all_lhs_u(f) { 2 } else { 3 }
}

// ---------------------------------------------------------------------------
// FO[Eq] to FC

struct ToFc<'a> {
    z: String,
    alphabet: &'a Alphabet,
    /// FO variables renamed because they clash with `u`
    renamed: BTreeMap<String, String>,
}

enum Side {
    Empty,
    Universe,
    Var(String),
}

impl ToFc<'_> {
    fn side(&self, t: &FoTerm) -> Side {
        match t {
            FoTerm::Min => Side::Empty,
            FoTerm::Max => Side::Universe,
            FoTerm::Var(v) => Side::Var(self.renamed.get(v).unwrap_or(v).clone()),
        }
    }

    fn name(&self, v: &str) -> String {
        self.renamed.get(v).cloned().unwrap_or_else(|| v.to_string())
    }

    fn pattern(&self, s: &Side) -> Pattern {
        match s {
            Side::Empty => Pattern::new(),
            Side::Universe => Pattern::var(UNIVERSE),
            Side::Var(v) => Pattern::var(v),
        }
    }

    /// `(x ⊑_p u)`: `∃z: u = x z`
    fn prefix(&self, x: &str) -> Formula {
        Formula::exists(&self.z, Formula::eq(UNIVERSE, Pattern::vars(&[x, &self.z])))
    }

    fn contradiction(&self) -> Formula {
        let a = self.alphabet.first().to_string();
        Formula::and(
            Formula::eq(UNIVERSE, Pattern::lit(&a)),
            Formula::eq(UNIVERSE, Pattern::lit(&format!("{a}{a}"))),
        )
    }

    fn any_letter(&self, make: impl Fn(&str) -> Formula) -> Formula {
        Formula::or_all(self.alphabet.letters().map(|c| make(&c.to_string())))
    }

    fn zp(&self) -> Pattern {
        Pattern::var(&self.z)
    }

    /// `l = r` where `l` may also be a constant.
    fn equate(&self, l: &Side, r: Pattern) -> Formula {
        match l {
            Side::Var(x) => Formula::eq(x, r),
            Side::Universe => Formula::eq(UNIVERSE, r),
            Side::Empty => {
                if r.terminal_len() > 0 {
                    return self.contradiction();
                }
                let parts: Vec<Formula> = r
                    .variables()
                    .into_iter()
                    .map(|v| Formula::eq(v, Pattern::new()))
                    .collect();
                if parts.is_empty() {
                    Formula::verum()
                } else {
                    Formula::and_all(parts)
                }
            }
        }
    }

    fn atom(&self, f: &FoEqFormula) -> Formula {
        use Side::*;
        match f {
            FoEqFormula::Equal(a, b) => match (self.side(a), self.side(b)) {
                (Var(x), Var(y)) => Formula::and_all([
                    Formula::eq(&x, Pattern::var(&y)),
                    self.prefix(&x),
                    self.prefix(&y),
                ]),
                (l @ Var(_), r) | (r, l @ Var(_)) => self.equate(&l, self.pattern(&r)),
                (Empty, Empty) | (Universe, Universe) => Formula::verum(),
                _ => Formula::eq(UNIVERSE, Pattern::new()),
            },
            FoEqFormula::Less(a, b) => match (self.side(a), self.side(b)) {
                (Var(x), Var(y)) => Formula::and(
                    self.prefix(&y),
                    self.any_letter(|c| {
                        Formula::exists(&self.z, Formula::eq(&y, Pattern::var(&x).concat(&Pattern::lit(c)).concat(&self.zp())))
                    }),
                ),
                (Empty, Universe) => Formula::exists(
                    &self.z,
                    self.any_letter(|c| Formula::eq(UNIVERSE, Pattern::lit(c).concat(&self.zp()))),
                ),
                (Var(x), Universe) => self.any_letter(|c| {
                    Formula::exists(&self.z, Formula::eq(UNIVERSE, Pattern::var(&x).concat(&Pattern::lit(c)).concat(&self.zp())))
                }),
                (Empty, Var(y)) => Formula::and(
                    self.prefix(&y),
                    Formula::exists(
                        &self.z,
                        self.any_letter(|c| Formula::eq(&y, Pattern::lit(c).concat(&self.zp()))),
                    ),
                ),
                _ => self.contradiction(),
            },
            FoEqFormula::Letter(c, t) => {
                let c = c.to_string();
                match self.side(t) {
                    Var(x) => Formula::exists(
                        &self.z,
                        Formula::eq(UNIVERSE, Pattern::var(&x).concat(&Pattern::lit(&c)).concat(&self.zp())),
                    ),
                    Empty => Formula::exists(&self.z, Formula::eq(UNIVERSE, Pattern::lit(&c).concat(&self.zp()))),
                    // the last position carries no letter
                    Universe => self.contradiction(),
                }
            }
            FoEqFormula::Succ(a, b) => match (self.side(a), self.side(b)) {
                (Universe, _) | (_, Empty) => self.contradiction(),
                (Empty, Universe) => self.any_letter(|c| Formula::eq(UNIVERSE, Pattern::lit(c))),
                (Var(x), Universe) => {
                    self.any_letter(|c| Formula::eq(UNIVERSE, Pattern::var(&x).concat(&Pattern::lit(c))))
                }
                (Empty, Var(y)) => Formula::and(self.prefix(&y), self.any_letter(|c| Formula::eq(&y, Pattern::lit(c)))),
                (Var(x), Var(y)) => Formula::and(
                    self.prefix(&y),
                    self.any_letter(|c| Formula::eq(&y, Pattern::var(&x).concat(&Pattern::lit(c)))),
                ),
            },
            FoEqFormula::Eq(ts) => {
                let mut guards = Vec::new();
                let mut eqs = Vec::new();
                for pair in [&ts[0..2], &ts[2..4]] {
                    let (x, y) = (self.side(&pair[0]), self.side(&pair[1]));
                    match &y {
                        Empty => {
                            if !matches!(x, Empty) {
                                eqs.push(self.equate(&x, Pattern::new()));
                            }
                            eqs.push(Formula::eq(&self.z, Pattern::new()));
                        }
                        Var(v) => {
                            guards.push(self.prefix(v));
                            eqs.push(Formula::eq(v, self.pattern(&x).concat(&self.zp())));
                        }
                        Universe => eqs.push(Formula::eq(UNIVERSE, self.pattern(&x).concat(&self.zp()))),
                    }
                }
                guards.push(Formula::exists(&self.z, Formula::and_all(eqs)));
                Formula::and_all(guards)
            }
            _ => unreachable!("not an atom"),
        }
    }

    fn translate(&self, f: &FoEqFormula) -> Formula {
        match f {
            _ if f.is_atom() => self.atom(f),
            FoEqFormula::And(a, b) => Formula::and(self.translate(a), self.translate(b)),
            FoEqFormula::Or(a, b) => {
                let (fa, fb) = (a.free_vars(), b.free_vars());
                let guard = |psi: Formula, missing: Vec<&String>| {
                    missing
                        .into_iter()
                        .map(|x| self.prefix(&self.name(x)))
                        .fold(psi, Formula::and)
                };
                Formula::or(
                    guard(self.translate(a), fb.difference(&fa).collect()),
                    guard(self.translate(b), fa.difference(&fb).collect()),
                )
            }
            FoEqFormula::Not(a) => a
                .free_vars()
                .iter()
                .map(|x| self.prefix(&self.name(x)))
                .fold(Formula::not(self.translate(a)), Formula::and),
            FoEqFormula::Exists(x, a) => Formula::exists(&self.name(x), self.translate(a)),
            FoEqFormula::Forall(x, a) => {
                let x = self.name(x);
                Formula::forall(&x, Formula::or(Formula::not(self.prefix(&x)), self.translate(a)))
            }
            _ => unreachable!(),
        }
    }
}

/// Translates FO[Eq] into FC over `alphabet`. Position `i` becomes the prefix
/// of length `i - 1`; free variables keep their names, except that an FO
/// variable called `u` is renamed since `u` denotes the whole word in FC.
pub fn foeq_to_fc(f: &FoEqFormula, alphabet: &Alphabet) -> Formula {
    let vars = f.all_vars();
    let mut names = FreshNames::new(vars.iter().cloned().chain([UNIVERSE.to_string()]));
    let renamed = if vars.contains(UNIVERSE) {
        BTreeMap::from([(UNIVERSE.to_string(), names.fresh("u"))])
    } else {
        BTreeMap::new()
    };
    let t = ToFc {
        z: names.fresh("z"),
        alphabet,
        renamed,
    };
    t.translate(f)
}

// ---------------------------------------------------------------------------
// FC to guarded C

/// Adds guards so that every variable is a factor of `u` under either
/// semantics: over the factors of `u` (FC) or over all of Σ* (C).
pub fn fc_to_c_guarded(f: &Formula) -> Result<Formula> {
    let mut names = FreshNames::avoiding(f);
    let (p, s) = (names.fresh("p"), names.fresh("s"));
    let embed = |eta: &Pattern| {
        Formula::eq(UNIVERSE, Pattern::var(&p).concat(eta).concat(&Pattern::var(&s)))
    };
    let guard = |x: &str| Formula::exists_all(&[&p, &s], embed(&Pattern::var(x)));
    fn go(
        f: &Formula,
        guard: &dyn Fn(&str) -> Formula,
        embed: &dyn Fn(&Pattern) -> Formula,
        ps: [&String; 2],
    ) -> Result<Formula> {
        Ok(match f {
            Formula::Eq(eq) if is_universe(&eq.lhs) => f.clone(),
            Formula::Eq(eq) => Formula::exists_all(
                &ps,
                Formula::and(embed(&Pattern::var(&eq.lhs)), embed(&eq.rhs)),
            ),
            Formula::And(a, b) => Formula::and(go(a, guard, embed, ps)?, go(b, guard, embed, ps)?),
            Formula::Or(a, b) => {
                let (fa, fb) = (free_vars(a), free_vars(b));
                let guarded = |psi: Formula, missing: Vec<&String>| {
                    missing.into_iter().map(|x| guard(x)).fold(psi, Formula::and)
                };
                Formula::or(
                    guarded(go(a, guard, embed, ps)?, fa.difference(&fb).collect()),
                    guarded(go(b, guard, embed, ps)?, fb.difference(&fa).collect()),
                )
            }
            Formula::Not(a) => free_vars(a)
                .iter()
                .map(|x| guard(x))
                .fold(Formula::not(go(a, guard, embed, ps)?), Formula::and),
            Formula::Exists(x, a) => Formula::exists(x, go(a, guard, embed, ps)?),
            Formula::Forall(x, a) => Formula::forall(
                x,
                Formula::or(go(a, guard, embed, ps)?, Formula::not(guard(x))),
            ),
            other => return Err(BridgeError::Unsupported(other.to_string())),
        })
    }
    go(f, &guard, &embed, [&p, &s])
}

// ---------------------------------------------------------------------------
// realization checks on one word

/// Every map from `vars` to positions `1..=size`, in lexicographic order.
fn assignments(vars: &[String], size: usize) -> Vec<Assignment> {
    let mut out = vec![Assignment::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|a| {
                (1..=size).map(move |i| {
                    let mut b = a.clone();
                    b.insert(v.clone(), i);
                    b
                })
            })
            .collect();
    }
    out
}

/// Checks on `w` that the FO[Eq] formula `psi` realizes the FC formula `phi`:
/// for every assignment of the pair variables `x_o`, `x_c`, `psi` holds iff
/// every `x_o ≤ x_c` and the factors `w[x_o, x_c)` satisfy `phi`.
pub fn check_fc_realization(phi: &Formula, psi: &FoEqFormula, w: &Word) -> Result<bool> {
    let idx = FactorIndex::new(w.clone());
    let (rel, _) = eval_relation(phi, &idx, Engine::BottomUp, EvalConfig::default())?;
    let pairs: Vec<String> = rel
        .scheme()
        .iter()
        .flat_map(|x| [opening(x), closing(x)])
        .collect();
    let a = WordStructure::new(w);
    for alpha in assignments(&pairs, a.size()) {
        let mut row = Vec::with_capacity(rel.arity());
        for x in rel.scheme() {
            let (o, c) = (alpha[&opening(x)], alpha[&closing(x)]);
            if o > c {
                break;
            }
            row.push(idx.canonicalize(FactorRef::new(o, c - o)));
        }
        let expected = row.len() == rel.arity() && rel.contains(&row);
        if a.satisfies(psi, &alpha)? != expected {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks on `w` that the FC formula `psi` realizes the FO[Eq] formula `phi`:
/// `⟦psi⟧(w)` consists exactly of the prefix tuples `w[1, α(x))` for the
/// assignments `α` that satisfy `phi`. Free FO variables must not be called `u`.
pub fn check_foeq_realization(phi: &FoEqFormula, psi: &Formula, w: &Word) -> Result<bool> {
    let vars: Vec<String> = phi.free_vars().into_iter().collect();
    if vars.iter().any(|v| is_universe(v)) {
        return Err(BridgeError::Unsupported(format!(
            "free variable `{UNIVERSE}` in {phi}"
        )));
    }
    let idx = FactorIndex::new(w.clone());
    let (rel, _) = eval_relation(psi, &idx, Engine::BottomUp, EvalConfig::default())?;
    if rel.scheme() != vars.as_slice() {
        return Ok(false);
    }
    let a = WordStructure::new(w);
    let mut expected = BTreeSet::new();
    for alpha in assignments(&vars, a.size()) {
        if a.satisfies(phi, &alpha)? {
            expected.insert(vars.iter().map(|v| FactorRef::new(1, alpha[v] - 1)).collect::<Vec<_>>());
        }
    }
    let actual: BTreeSet<Vec<FactorRef>> = rel.rows().iter().cloned().collect();
    Ok(actual == expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{check, eval_naive, EvalConfig, Engine};
    use crate::relation::Substitution;
    use crate::syntax::{parse, width};

    fn sentence_holds(f: &Formula, w: &str) -> bool {
        eval_naive(f, &Substitution::new(Word::new(w))).unwrap().holds
    }

    fn fo_holds(f: &FoEqFormula, w: &str) -> bool {
        eval_foeq(f, &Word::new(w), &Assignment::new()).unwrap()
    }

    #[test]
    fn squares_in_foeq() {
        let f = parse_foeq("exists x: Eq(min, x, x, max)").unwrap();
        assert!(fo_holds(&f, "abab"));
        assert!(fo_holds(&f, ""));
        assert!(!fo_holds(&f, "aba"));
        assert!(!fo_holds(&f, "abba"));
    }

    #[test]
    fn min_equals_max_only_on_empty() {
        let f = parse_foeq("min = max").unwrap();
        assert!(fo_holds(&f, ""));
        assert!(!fo_holds(&f, "a"));
    }

    #[test]
    fn split_positions_of_aa() {
        let f = parse_foeq("Eq(min, x, x, max)").unwrap();
        let w = Word::new("aa");
        let hits: Vec<usize> = (1..=3)
            .filter(|&i| eval_foeq(&f, &w, &Assignment::from([("x".into(), i)])).unwrap())
            .collect();
        assert_eq!(hits, vec![2]);
    }

    #[test]
    fn unbound_fo_variable() {
        let f = parse_foeq("x < y").unwrap();
        assert_eq!(
            eval_foeq(&f, &Word::new("ab"), &Assignment::new()),
            Err(BridgeError::UnboundVariable("x".into()))
        );
    }

    #[test]
    fn print_parse_roundtrip() {
        for src in [
            "exists x: Eq(min, x, x, max) & Pa(x)",
            "forall x: !(x < max) | P\"#\"(x) | succ(min, x)",
            "(x = y | y <= max) & exists z, t: Pb(z) & z < t",
        ] {
            let f = parse_foeq(src).unwrap();
            assert_eq!(parse_foeq(&f.to_string()).unwrap(), f, "{src}");
        }
    }

    #[test]
    fn square_equation_shape() {
        let f = fc_to_foeq(&parse("u = x x").unwrap()).unwrap();
        assert_eq!(f.free_vars(), BTreeSet::from(["x_c".into(), "x_o".into()]));
        assert!(f.is_ep());
        let e = fc_to_foeq(&parse("x = \"\"").unwrap()).unwrap();
        assert_eq!(e, FoEqFormula::Equal(fo("x_o"), fo("x_c")));
    }

    #[test]
    fn u_with_terminal_on_right_is_unsatisfiable() {
        let f = fc_to_foeq(&parse("x = u \"a\" u").unwrap()).unwrap();
        for w in ["", "a", "ab"] {
            let ws = WordStructure::new(&Word::new(w));
            for i in 1..=ws.size() {
                for j in 1..=ws.size() {
                    let a = Assignment::from([("x_o".into(), i), ("x_c".into(), j)]);
                    assert!(!ws.satisfies(&f, &a).unwrap());
                }
            }
        }
    }

    #[test]
    fn example_sentence_converts_to_squares() {
        let ab = Alphabet::parse("ab").unwrap();
        let f = foeq_to_fc(&parse_foeq("exists x: Eq(min, x, x, max)").unwrap(), &ab);
        for w in ab.words_up_to(6) {
            let s: String = w.symbols().iter().collect();
            let n = s.len();
            let square = n % 2 == 0 && s[..n / 2] == s[n / 2..];
            assert_eq!(sentence_holds(&f, &s), square, "{s}");
        }
    }

    #[test]
    fn letter_at_split_point() {
        let ab = Alphabet::parse("ab").unwrap();
        let f = foeq_to_fc(&parse_foeq("Eq(min, x, x, max) & Pa(x)").unwrap(), &ab);
        assert_eq!(free_vars(&f), BTreeSet::from(["x".to_string()]));
        let s = Substitution::new(Word::new("abab")).bind("x", "ab");
        assert!(check(&f, &s, Engine::Naive, EvalConfig::default()).unwrap().holds);
        let s = Substitution::new(Word::new("baba")).bind("x", "ba");
        assert!(!check(&f, &s, Engine::Naive, EvalConfig::default()).unwrap().holds);
    }

    #[test]
    fn succ_min_max() {
        let ab = Alphabet::parse("ab").unwrap();
        let f = foeq_to_fc(&parse_foeq("succ(min, max)").unwrap(), &ab);
        for (w, want) in [("", false), ("a", true), ("b", true), ("ab", false)] {
            assert_eq!(sentence_holds(&f, w), want, "{w}");
        }
    }

    #[test]
    fn guarded_c_shapes() {
        let g = fc_to_c_guarded(&parse("x = \"a\"").unwrap()).unwrap();
        assert_eq!(g.to_string(), "exists _p, _s: u = _p x _s & u = _p \"a\" _s");
        let f = parse("u = x \"a\" x").unwrap();
        assert_eq!(fc_to_c_guarded(&f).unwrap(), f);
        let g = fc_to_c_guarded(&parse("forall x: x = x").unwrap()).unwrap();
        assert!(g.to_string().starts_with("forall x: "));
        assert!(width(&g) <= 3);
    }

    #[test]
    fn realization_checks_on_open_formulas() {
        let ab = Alphabet::parse("ab").unwrap();
        let phi = parse("exists y: x = y y").unwrap();
        let psi = fc_to_foeq(&phi).unwrap();
        let fo = parse_foeq("exists y: y < x & Pa(y)").unwrap();
        let back = foeq_to_fc(&fo, &ab);
        for w in ab.words_up_to(4) {
            assert!(check_fc_realization(&phi, &psi, &w).unwrap(), "{w}");
            assert!(check_foeq_realization(&fo, &back, &w).unwrap(), "{w}");
        }
        let wrong = parse_foeq("x_o = x_c").unwrap();
        assert!(!check_fc_realization(&phi, &wrong, &Word::new("aa")).unwrap());
    }
}
