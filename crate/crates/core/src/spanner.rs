//! Document spanners: regex formulas with variable bindings, the spanner
//! algebra, and their compilation into FC[REG].
//!
//! A spanner variable `x` is represented in FC by two variables: `x_P` holds
//! the prefix of the word before the span and `x_C` the span's content, so the
//! span `[i, j⟩` is recovered as `i = |x_P| + 1`, `j = i + |x_C|`.
//!
//! Regex formula syntax extends the regex literal syntax with `x{...}`. The
//! binding name is the maximal run of identifier characters before `{`, so a
//! letter directly in front of a binding needs parentheses: `a(x{b})`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::eval::{eval_relation, Engine, EvalConfig, EvalError};
use crate::regexlang::{parse_tree, write_letter, Regex, RegexError};
use crate::syntax::{tokenize, Cursor, Formula, FreshNames, Pattern, SyntaxError, Tok, UNIVERSE};
use crate::word::{FactorIndex, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpannerError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("in regex formula: {0}")]
    Regex(#[from] RegexError),
    #[error("regex formula {formula} is not functional: {reason}")]
    NotFunctional { formula: String, reason: String },
    #[error("{0}")]
    Scheme(String),
    #[error("unknown spanner name `{0}`")]
    UnknownName(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, SpannerError>;

/// A regular expression with variable bindings `x{...}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RegexFormula {
    Empty,
    Eps,
    Letter(char),
    Sigma,
    Concat(Box<RegexFormula>, Box<RegexFormula>),
    Union(Box<RegexFormula>, Box<RegexFormula>),
    Star(Box<RegexFormula>),
    Bind(String, Box<RegexFormula>),
}

impl RegexFormula {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(parse_tree(text, true)?)
    }

    /// Variables bound anywhere in the formula.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            RegexFormula::Concat(a, b) | RegexFormula::Union(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            RegexFormula::Star(a) => a.collect_vars(out),
            RegexFormula::Bind(x, a) => {
                out.insert(x.clone());
                a.collect_vars(out);
            }
            _ => {}
        }
    }

    /// Checks functionality syntactically and returns the variables bound on
    /// every match.
    pub fn functional_variables(&self) -> std::result::Result<BTreeSet<String>, String> {
        match self {
            RegexFormula::Empty | RegexFormula::Eps | RegexFormula::Letter(_) | RegexFormula::Sigma => {
                Ok(BTreeSet::new())
            }
            RegexFormula::Concat(a, b) => {
                let (va, vb) = (a.functional_variables()?, b.functional_variables()?);
                if let Some(x) = va.intersection(&vb).next() {
                    return Err(format!("`{x}` is bound on both sides of a concatenation"));
                }
                Ok(va.union(&vb).cloned().collect())
            }
            RegexFormula::Union(a, b) => {
                let (va, vb) = (a.functional_variables()?, b.functional_variables()?);
                if va != vb {
                    return Err("the branches of a union bind different variables".into());
                }
                Ok(va)
            }
            RegexFormula::Star(a) => {
                if let Some(x) = a.variables().into_iter().next() {
                    return Err(format!("`{x}` is bound under a star"));
                }
                Ok(BTreeSet::new())
            }
            RegexFormula::Bind(x, a) => {
                let mut v = a.functional_variables()?;
                if !v.insert(x.clone()) {
                    return Err(format!("`{x}` is bound inside its own binding"));
                }
                Ok(v)
            }
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> Self {
        let go = |a: &RegexFormula| Box::new(a.rename(from, to));
        match self {
            RegexFormula::Concat(a, b) => RegexFormula::Concat(go(a), go(b)),
            RegexFormula::Union(a, b) => RegexFormula::Union(go(a), go(b)),
            RegexFormula::Star(a) => RegexFormula::Star(go(a)),
            RegexFormula::Bind(x, a) => {
                RegexFormula::Bind(if x == from { to.to_string() } else { x.clone() }, go(a))
            }
            other => other.clone(),
        }
    }

    /// The plain regex, if no variable is bound.
    pub fn to_regex(&self) -> Option<Regex> {
        Some(match self {
            RegexFormula::Empty => Regex::Empty,
            RegexFormula::Eps => Regex::Eps,
            RegexFormula::Letter(c) => Regex::Letter(*c),
            RegexFormula::Sigma => Regex::Sigma,
            RegexFormula::Concat(a, b) => Regex::concat(a.to_regex()?, b.to_regex()?),
            RegexFormula::Union(a, b) => Regex::union(a.to_regex()?, b.to_regex()?),
            RegexFormula::Star(a) => Regex::star(a.to_regex()?),
            RegexFormula::Bind(..) => return None,
        })
    }
}

/// Whether every match binds each variable exactly once: union branches bind
/// the same variables, concatenations bind disjoint ones, stars bind none.
pub fn check_functional(a: &RegexFormula) -> bool {
    a.functional_variables().is_ok()
}

/// `level`: 0 = union context, 1 = concatenation, 2 = operand of a star.
fn write_rf(f: &mut fmt::Formatter<'_>, r: &RegexFormula, level: u8) -> fmt::Result {
    let paren = match r {
        RegexFormula::Union(..) => level > 0,
        RegexFormula::Concat(..) => level > 1,
        // keeps a preceding letter from being read as part of the name
        RegexFormula::Bind(..) => level > 0,
        _ => false,
    };
    if paren {
        write!(f, "(")?;
    }
    match r {
        RegexFormula::Empty => write!(f, "\\0")?,
        RegexFormula::Eps => write!(f, "()")?,
        RegexFormula::Letter(c) => write_letter(f, *c)?,
        RegexFormula::Sigma => write!(f, "S")?,
        RegexFormula::Union(a, b) => {
            write_rf(f, a, 0)?;
            write!(f, "|")?;
            write_rf(f, b, if matches!(**b, RegexFormula::Union(..)) { 1 } else { 0 })?;
        }
        RegexFormula::Concat(a, b) => {
            write_rf(f, a, 1)?;
            write_rf(f, b, if matches!(**b, RegexFormula::Concat(..)) { 2 } else { 1 })?;
        }
        RegexFormula::Star(a) => {
            write_rf(f, a, 2)?;
            write!(f, "*")?;
        }
        RegexFormula::Bind(x, a) => {
            write!(f, "{x}{{")?;
            write_rf(f, a, 0)?;
            write!(f, "}}")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for RegexFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_rf(f, self, 0)
    }
}

/// `[start, end⟩`, 1-based: the factor `w[start..end-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(1 <= start && start <= end, "invalid span [{start}, {end}>");
        Self { start, end }
    }

    pub fn text(self, w: &Word) -> String {
        w.symbols()[self.start - 1..self.end - 1].iter().collect()
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}>", self.start, self.end)
    }
}

pub type SpanTuple = BTreeMap<String, Span>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpannerExpr {
    Rgx(RegexFormula),
    Union(Box<SpannerExpr>, Box<SpannerExpr>),
    Join(Box<SpannerExpr>, Box<SpannerExpr>),
    Project(BTreeSet<String>, Box<SpannerExpr>),
    Diff(Box<SpannerExpr>, Box<SpannerExpr>),
    EqSelect(String, String, Box<SpannerExpr>),
}

impl SpannerExpr {
    /// Checks the scheme rules and returns the spanner's variables.
    pub fn variables(&self) -> Result<BTreeSet<String>> {
        match self {
            SpannerExpr::Rgx(a) => a.functional_variables().map_err(|reason| SpannerError::NotFunctional {
                formula: a.to_string(),
                reason,
            }),
            SpannerExpr::Union(a, b) | SpannerExpr::Diff(a, b) => {
                let (va, vb) = (a.variables()?, b.variables()?);
                if va != vb {
                    let op = if matches!(self, SpannerExpr::Union(..)) { "union" } else { "diff" };
                    return Err(SpannerError::Scheme(format!(
                        "{op} needs operands with equal variables, got {{{}}} and {{{}}}",
                        join_names(&va),
                        join_names(&vb)
                    )));
                }
                Ok(va)
            }
            SpannerExpr::Join(a, b) => Ok(a.variables()?.union(&b.variables()?).cloned().collect()),
            SpannerExpr::Project(keep, a) => {
                let va = a.variables()?;
                if let Some(x) = keep.difference(&va).next() {
                    return Err(SpannerError::Scheme(format!("cannot project to `{x}`, which the operand lacks")));
                }
                Ok(keep.clone())
            }
            SpannerExpr::EqSelect(x, y, a) => {
                let va = a.variables()?;
                if let Some(z) = [x, y].into_iter().find(|z| !va.contains(*z)) {
                    return Err(SpannerError::Scheme(format!("eqsel on `{z}`, which the operand lacks")));
                }
                Ok(va)
            }
        }
    }

    /// Core spanners use no difference.
    pub fn is_core(&self) -> bool {
        match self {
            SpannerExpr::Rgx(_) => true,
            SpannerExpr::Diff(..) => false,
            SpannerExpr::Union(a, b) | SpannerExpr::Join(a, b) => a.is_core() && b.is_core(),
            SpannerExpr::Project(_, a) | SpannerExpr::EqSelect(_, _, a) => a.is_core(),
        }
    }
}

fn join_names(s: &BTreeSet<String>) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(", ")
}

impl fmt::Display for SpannerExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &SpannerExpr| match e {
            SpannerExpr::Rgx(_) => e.to_string(),
            _ => format!("({e})"),
        };
        match self {
            SpannerExpr::Rgx(a) => {
                // a slash inside the literal is escaped by write_letter
                write!(f, "/{a}/")
            }
            SpannerExpr::Union(a, b) => write!(f, "union {} {}", sub(a), sub(b)),
            SpannerExpr::Join(a, b) => write!(f, "join {} {}", sub(a), sub(b)),
            SpannerExpr::Diff(a, b) => write!(f, "diff {} {}", sub(a), sub(b)),
            SpannerExpr::Project(v, a) => write!(f, "project {{{}}} {}", join_names(v), sub(a)),
            SpannerExpr::EqSelect(x, y, a) => write!(f, "eqsel {x} {y} {}", sub(a)),
        }
    }
}

// ---------------------------------------------------------------------------
// expression language

struct ExprParser {
    cur: Cursor,
    lets: BTreeMap<String, SpannerExpr>,
}

impl ExprParser {
    fn expr(&mut self) -> Result<SpannerExpr> {
        let t = self.cur.peek().clone();
        match &t.tok {
            Tok::Regex(src) => {
                self.cur.next();
                let a = RegexFormula::parse(src).map_err(|e| match e {
                    SpannerError::Regex(r) => SpannerError::Syntax(SyntaxError::Regex {
                        line: t.line,
                        col: t.col + 1 + r.position,
                        message: r.message,
                    }),
                    other => other,
                })?;
                Ok(SpannerExpr::Rgx(a))
            }
            Tok::Sym('(') => {
                self.cur.next();
                let e = self.expr()?;
                self.cur.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(kw) => {
                let kw = kw.clone();
                self.cur.next();
                let binary = |p: &mut Self, make: fn(Box<SpannerExpr>, Box<SpannerExpr>) -> SpannerExpr| {
                    let a = p.expr()?;
                    let b = p.expr()?;
                    Ok(make(Box::new(a), Box::new(b)))
                };
                match kw.as_str() {
                    "union" => binary(self, SpannerExpr::Union),
                    "join" => binary(self, SpannerExpr::Join),
                    "diff" => binary(self, SpannerExpr::Diff),
                    "project" => {
                        let mut keep = BTreeSet::new();
                        if self.cur.eat_sym('{') {
                            if !self.cur.at_sym('}') {
                                loop {
                                    keep.insert(self.cur.expect_ident()?.0);
                                    if !self.cur.eat_sym(',') {
                                        break;
                                    }
                                }
                            }
                            self.cur.expect_sym('}')?;
                        } else {
                            keep.insert(self.cur.expect_ident()?.0);
                        }
                        Ok(SpannerExpr::Project(keep, Box::new(self.expr()?)))
                    }
                    "eqsel" => {
                        let x = self.cur.expect_ident()?.0;
                        let y = self.cur.expect_ident()?.0;
                        Ok(SpannerExpr::EqSelect(x, y, Box::new(self.expr()?)))
                    }
                    name => self
                        .lets
                        .get(name)
                        .cloned()
                        .ok_or_else(|| SpannerError::UnknownName(name.to_string())),
                }
            }
            _ => Err(self.cur.unexpected("a spanner expression").into()),
        }
    }

    fn script(&mut self) -> Result<SpannerExpr> {
        while self.cur.at_keyword("let") {
            self.cur.next();
            let name = self.cur.expect_ident()?.0;
            self.cur.expect_sym('=')?;
            let e = self.expr()?;
            self.cur.eat_sym(';');
            self.lets.insert(name, e);
        }
        let e = self.expr()?;
        self.cur.eat_sym(';');
        if !self.cur.at_eof() {
            return Err(self.cur.unexpected("end of input").into());
        }
        Ok(e)
    }
}

/// Parses a spanner script: `let name = expr` definitions followed by one
/// expression. Expressions are `/regex formula/`, `union e e`, `join e e`,
/// `diff e e`, `project {x, y} e` (or `project x e`), `eqsel x y e`, a
/// defined name, or a parenthesized expression.
pub fn parse_spanner(text: &str) -> Result<SpannerExpr> {
    let mut p = ExprParser {
        cur: Cursor::new(tokenize(text)?),
        lets: BTreeMap::new(),
    };
    let e = p.script()?;
    e.variables()?;
    Ok(e)
}

// ---------------------------------------------------------------------------
// compilation

pub fn prefix_var(x: &str) -> String {
    format!("{x}_P")
}

pub fn content_var(x: &str) -> String {
    format!("{x}_C")
}

/// How a variable-free regex appears in a compiled concatenation.
enum Item {
    /// A fixed word, written as a literal.
    Word(Pattern),
    /// `Σ*`, which every factor matches.
    Any,
    Constrained(Regex),
}

fn flatten<'a>(b: &'a RegexFormula, out: &mut Vec<&'a RegexFormula>) {
    match b {
        RegexFormula::Concat(l, r) => {
            flatten(l, out);
            flatten(r, out);
        }
        other => out.push(other),
    }
}

struct Compiler {
    names: FreshNames,
}

impl Compiler {
    fn new(vars: &BTreeSet<String>) -> Self {
        Self {
            names: FreshNames::new(
                vars.iter()
                    .flat_map(|x| [prefix_var(x), content_var(x)])
                    .chain([UNIVERSE.to_string()]),
            ),
        }
    }

    /// A formula saying that `c` is the content of a match of `b` that starts
    /// right after the prefix `p`.
    ///
    /// A concatenation becomes a single equation `c = c_1 ⋯ c_k` over its
    /// factors: runs without variables become literals or constrained
    /// variables, a binding `x{γ}` with variable-free `γ` uses `x_C` itself,
    /// and the remaining factors recurse with their prefix `p c_1 ⋯ c_{i-1}`.
    fn regex(&mut self, b: &RegexFormula, p: &Pattern, c: &str) -> Formula {
        if let Some(r) = b.to_regex() {
            return match self.item(&r) {
                Item::Word(w) => Formula::eq(c, w),
                Item::Any => Formula::eq(c, Pattern::var(c)),
                Item::Constrained(r) => Formula::constraint(c, r),
            };
        }
        match b {
            RegexFormula::Concat(..) => {
                let mut factors = Vec::new();
                flatten(b, &mut factors);
                let mut runs: Vec<RegexFormula> = Vec::new();
                for f in factors {
                    match runs.last_mut() {
                        Some(last) if last.variables().is_empty() && f.variables().is_empty() => {
                            *last = RegexFormula::Concat(Box::new(last.clone()), Box::new(f.clone()));
                        }
                        _ => runs.push(f.clone()),
                    }
                }
                let mut rhs = Pattern::new();
                let mut quantified = Vec::new();
                let mut parts = Vec::new();
                for run in &runs {
                    let here = p.clone().concat(&rhs);
                    if let Some(r) = run.to_regex() {
                        match self.item(&r) {
                            Item::Word(w) => rhs = rhs.concat(&w),
                            Item::Any => {
                                let v = self.names.fresh("c");
                                rhs.push_var(&v);
                                quantified.push(v);
                            }
                            Item::Constrained(r) => {
                                let v = self.names.fresh("c");
                                rhs.push_var(&v);
                                parts.push(Formula::constraint(&v, r));
                                quantified.push(v);
                            }
                        }
                        continue;
                    }
                    if let RegexFormula::Bind(x, a) = run {
                        if a.variables().is_empty() {
                            let xc = content_var(x);
                            parts.push(Formula::eq(&prefix_var(x), here));
                            parts.push(self.regex(a, &Pattern::new(), &xc));
                            rhs.push_var(&xc);
                            continue;
                        }
                    }
                    let v = self.names.fresh("c");
                    parts.push(self.regex(run, &here, &v));
                    rhs.push_var(&v);
                    quantified.push(v);
                }
                parts.insert(0, Formula::eq(c, rhs));
                Formula::exists_all(&quantified, Formula::and_all(parts))
            }
            RegexFormula::Union(l, r) => Formula::or(self.regex(l, p, c), self.regex(r, p, c)),
            RegexFormula::Bind(x, a) => Formula::and_all([
                Formula::eq(&prefix_var(x), p.clone()),
                Formula::eq(&content_var(x), Pattern::var(c)),
                self.regex(a, p, c),
            ]),
            _ => unreachable!("variable bindings only below concatenation, union, and binding"),
        }
    }

    fn item(&mut self, r: &Regex) -> Item {
        if let Some(w) = r.as_word() {
            return Item::Word(Pattern::lit(&w.into_iter().collect::<String>()));
        }
        if *r == Regex::star(Regex::Sigma) {
            return Item::Any;
        }
        Item::Constrained(r.clone())
    }

    fn expr(&mut self, e: &SpannerExpr) -> Formula {
        match e {
            SpannerExpr::Rgx(a) => self.regex(a, &Pattern::new(), UNIVERSE),
            SpannerExpr::Union(a, b) => Formula::or(self.expr(a), self.expr(b)),
            SpannerExpr::Join(a, b) => Formula::and(self.expr(a), self.expr(b)),
            SpannerExpr::Diff(a, b) => Formula::and(self.expr(a), Formula::not(self.expr(b))),
            SpannerExpr::Project(keep, a) => {
                let dropped: Vec<String> = a
                    .variables()
                    .expect("checked before compiling")
                    .difference(keep)
                    .flat_map(|x| [prefix_var(x), content_var(x)])
                    .collect();
                Formula::exists_all(&dropped, self.expr(a))
            }
            SpannerExpr::EqSelect(x, y, a) => Formula::and(
                self.expr(a),
                Formula::eq(&content_var(x), Pattern::var(&content_var(y))),
            ),
        }
    }
}

/// Compiles a functional regex formula into an existential-positive FC[REG]
/// formula over `x_P`, `x_C` for each of its variables.
pub fn compile_regex_formula(a: &RegexFormula) -> Result<Formula> {
    compile_algebra(&SpannerExpr::Rgx(a.clone()))
}

/// Compiles a spanner expression into FC[REG].
pub fn compile_algebra(e: &SpannerExpr) -> Result<Formula> {
    e.variables()?;
    let mut all = BTreeSet::new();
    collect_all_vars(e, &mut all);
    Ok(Compiler::new(&all).expr(e))
}

fn collect_all_vars(e: &SpannerExpr, out: &mut BTreeSet<String>) {
    match e {
        SpannerExpr::Rgx(a) => out.extend(a.variables()),
        SpannerExpr::Union(a, b) | SpannerExpr::Join(a, b) | SpannerExpr::Diff(a, b) => {
            collect_all_vars(a, out);
            collect_all_vars(b, out);
        }
        SpannerExpr::Project(_, a) | SpannerExpr::EqSelect(_, _, a) => collect_all_vars(a, out),
    }
}

/// Evaluates a spanner by compiling it and decoding the rows of the formula's
/// relation into spans.
pub fn eval_spanner_with(e: &SpannerExpr, w: &Word, engine: Engine, config: EvalConfig) -> Result<BTreeSet<SpanTuple>> {
    let vars = e.variables()?;
    let f = compile_algebra(e)?;
    let idx = FactorIndex::new(w.clone());
    let (rel, _) = eval_relation(&f, &idx, engine, config)?;
    let cols: Vec<(String, usize, usize)> = vars
        .iter()
        .map(|x| {
            let p = rel.column(&prefix_var(x)).expect("prefix column");
            let c = rel.column(&content_var(x)).expect("content column");
            (x.clone(), p, c)
        })
        .collect();
    Ok(rel
        .rows()
        .iter()
        .map(|row| {
            cols.iter()
                .map(|(x, p, c)| {
                    let start = row[*p].len as usize + 1;
                    (x.clone(), Span::new(start, start + row[*c].len as usize))
                })
                .collect()
        })
        .collect())
}

pub fn eval_spanner(e: &SpannerExpr, w: &Word) -> Result<BTreeSet<SpanTuple>> {
    eval_spanner_with(e, w, Engine::BottomUp, EvalConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::classify;

    fn tuples(src: &str, w: &str) -> BTreeSet<SpanTuple> {
        eval_spanner(&parse_spanner(src).unwrap(), &Word::new(w)).unwrap()
    }

    fn one(x: &str, s: usize, e: usize) -> SpanTuple {
        SpanTuple::from([(x.to_string(), Span::new(s, e))])
    }

    #[test]
    fn functionality() {
        let ok = RegexFormula::parse("S*(x{banana}|x{papaya})S*").unwrap();
        assert!(check_functional(&ok));
        assert!(!check_functional(&RegexFormula::parse("x{a}|()").unwrap()));
        assert!(!check_functional(&RegexFormula::parse("(x{a})*").unwrap()));
        assert!(!check_functional(&RegexFormula::parse("x{a}x{b}").unwrap()));
    }

    #[test]
    fn banana() {
        assert_eq!(
            tuples("/S*(x{banana}|x{papaya})S*/", "banana"),
            BTreeSet::from([one("x", 1, 7)])
        );
    }

    #[test]
    fn empty_binding_everywhere() {
        assert_eq!(tuples("/S*x{()}S*/", "ab").len(), 3);
        assert_eq!(
            tuples("/S*x{()}S*/", "a"),
            BTreeSet::from([one("x", 1, 1), one("x", 2, 2)])
        );
    }

    #[test]
    fn equal_banana_pair() {
        let script = "let a = /S*(x{banana}|x{papaya})S*/\n\
                      let b = /S*(y{banana}|y{papaya})S*/\n\
                      let before = /S*x{S*}S*y{S*}S*/\n\
                      eqsel x y (join (join a b) before)";
        let got = tuples(script, "banana#banana");
        let want = SpanTuple::from([("x".into(), Span::new(1, 7)), ("y".into(), Span::new(8, 14))]);
        assert_eq!(got, BTreeSet::from([want]));
    }

    #[test]
    fn compiled_regex_formula_is_ep() {
        let a = RegexFormula::parse("S*x{S*}S*y{a|b}S*").unwrap();
        let f = compile_regex_formula(&a).unwrap();
        assert!(classify(&f).is_ep());
        let vars: BTreeSet<String> = crate::syntax::free_vars(&f);
        assert_eq!(vars, BTreeSet::from(["x_C".into(), "x_P".into(), "y_C".into(), "y_P".into()]));
    }

    #[test]
    fn difference_with_itself_is_empty() {
        assert!(tuples("diff /S*x{a}S*/ /S*x{a}S*/", "aba").is_empty());
    }

    #[test]
    fn projection_to_nothing() {
        let f = compile_algebra(&parse_spanner("project {} /S*x{ab}S*/").unwrap()).unwrap();
        assert!(crate::syntax::free_vars(&f).is_empty());
        assert_eq!(tuples("project {} /S*x{ab}S*/", "aab").len(), 1);
        assert!(tuples("project {} /S*x{ab}S*/", "ba").is_empty());
    }

    #[test]
    fn scheme_errors() {
        assert!(matches!(parse_spanner("union /x{a}/ /y{a}/"), Err(SpannerError::Scheme(_))));
        assert!(matches!(parse_spanner("project z /x{a}/"), Err(SpannerError::Scheme(_))));
        assert!(matches!(parse_spanner("/(x{a})*/"), Err(SpannerError::NotFunctional { .. })));
        assert!(matches!(parse_spanner("join r /x{a}/"), Err(SpannerError::UnknownName(_))));
    }

    #[test]
    fn print_parse_roundtrip() {
        for src in [
            "eqsel x y (join /S*x{a|b}S*/ /S*(y{ab*})S*/)",
            "project {x} (diff /a(x{b})/ /x{()}ab/)",
        ] {
            let e = parse_spanner(src).unwrap();
            assert_eq!(parse_spanner(&e.to_string()).unwrap(), e, "{src}");
        }
    }
}
