//! Formula AST, surface syntax (parser and printer), and static analyses.
//!
//! Grammar (whitespace-insensitive, `#` starts a line comment):
//!
//! ```text
//! formula  := quant | or
//! quant    := ("exists" | "forall") ident ("," ident)* ":" formula
//! or       := and ("|" and)*
//! and      := unary ("&" unary)*
//! unary    := "!" unary | quant | "(" formula ")" | atom
//! atom     := ident "=" pattern
//!           | ident "in" "/" regex "/"
//!           | ident "(" [ident ("," ident)*] ")"
//!           | ("tc" | "dtc") "[" idents ";" idents ":" formula "]" "(" idents ";" idents ")"
//!           | ("lfp" | "pfp") "[" [idents ","] ident ":" formula "]" "(" [idents] ")"
//! pattern  := (ident | string)+
//! ```
//!
//! A quantifier body extends as far to the right as possible. Terminal words
//! are always quoted (`"ab"`, with `""` for the empty word), so variable names
//! never collide with letters. `u` is the universe variable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::regexlang::Regex;

/// The universe variable.
pub const UNIVERSE: &str = "u";

pub const KEYWORDS: &[&str] = &["exists", "forall", "in", "tc", "dtc", "lfp", "pfp"];

pub fn is_universe(v: &str) -> bool {
    v == UNIVERSE
}

/// One item of a pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Lit(Vec<char>),
}

/// A word over terminals and variables. Adjacent terminals are merged and
/// empty terminals dropped, so the empty pattern denotes ε.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    items: Vec<Term>,
}

impl Pattern {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut p = Self::new();
        for t in terms {
            p.push(t);
        }
        p
    }

    pub fn var(v: &str) -> Self {
        Self::from_terms([Term::Var(v.to_string())])
    }

    pub fn lit(s: &str) -> Self {
        Self::from_terms([Term::Lit(s.chars().collect())])
    }

    pub fn vars<S: AsRef<str>>(vs: &[S]) -> Self {
        Self::from_terms(vs.iter().map(|v| Term::Var(v.as_ref().to_string())))
    }

    pub fn push(&mut self, t: Term) {
        match t {
            Term::Lit(s) if s.is_empty() => {}
            Term::Lit(s) => {
                if let Some(Term::Lit(prev)) = self.items.last_mut() {
                    prev.extend(s);
                } else {
                    self.items.push(Term::Lit(s));
                }
            }
            v => self.items.push(v),
        }
    }

    pub fn push_var(&mut self, v: &str) {
        self.push(Term::Var(v.to_string()));
    }

    pub fn push_lit(&mut self, s: &[char]) {
        self.push(Term::Lit(s.to_vec()));
    }

    pub fn concat(mut self, other: &Pattern) -> Self {
        for t in &other.items {
            self.push(t.clone());
        }
        self
    }

    pub fn items(&self) -> &[Term] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.items {
            if let Term::Var(v) = t {
                if seen.insert(v.as_str()) {
                    out.push(v.as_str());
                }
            }
        }
        out
    }

    /// Total number of terminal symbols.
    pub fn terminal_len(&self) -> usize {
        self.items
            .iter()
            .map(|t| match t {
                Term::Lit(s) => s.len(),
                Term::Var(_) => 0,
            })
            .sum()
    }

    /// The pattern as a sequence of single symbols: each terminal letter and
    /// each variable occurrence is one position.
    pub fn positions(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for t in &self.items {
            match t {
                Term::Var(v) => out.push(Term::Var(v.clone())),
                Term::Lit(s) => out.extend(s.iter().map(|&c| Term::Lit(vec![c]))),
            }
        }
        out
    }

    fn rename(&self, from: &str, to: &str) -> Pattern {
        Pattern::from_terms(self.items.iter().map(|t| match t {
            Term::Var(v) if v == from => Term::Var(to.to_string()),
            t => t.clone(),
        }))
    }
}

/// A word equation `lhs = rhs` with a single variable on the left.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WordEquation {
    pub lhs: String,
    pub rhs: Pattern,
}

impl WordEquation {
    pub fn new(lhs: &str, rhs: Pattern) -> Self {
        Self {
            lhs: lhs.to_string(),
            rhs,
        }
    }

    /// All variables including `u`, in order of first occurrence.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = vec![self.lhs.as_str()];
        for v in self.rhs.variables() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClosureKind {
    Tc,
    Dtc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixKind {
    Lfp,
    Pfp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Eq(WordEquation),
    Constraint {
        var: String,
        regex: Regex,
    },
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    Rel {
        name: String,
        args: Vec<String>,
    },
    /// `[tc from, to : body](src, dst)`
    Closure {
        kind: ClosureKind,
        from: Vec<String>,
        to: Vec<String>,
        body: Box<Formula>,
        src: Vec<String>,
        dst: Vec<String>,
    },
    /// `[lfp vars, rel : body](args)`
    Fixpoint {
        kind: FixKind,
        vars: Vec<String>,
        rel: String,
        body: Box<Formula>,
        args: Vec<String>,
    },
}

impl Formula {
    pub fn eq(lhs: &str, rhs: Pattern) -> Self {
        Formula::Eq(WordEquation::new(lhs, rhs))
    }

    pub fn constraint(var: &str, regex: Regex) -> Self {
        Formula::Constraint {
            var: var.to_string(),
            regex,
        }
    }

    pub fn rel<S: AsRef<str>>(name: &str, args: &[S]) -> Self {
        Formula::Rel {
            name: name.to_string(),
            args: args.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Self {
        Formula::Not(Box::new(a))
    }

    pub fn exists(v: &str, body: Formula) -> Self {
        Formula::Exists(v.to_string(), Box::new(body))
    }

    pub fn forall(v: &str, body: Formula) -> Self {
        Formula::Forall(v.to_string(), Box::new(body))
    }

    /// Left-nested conjunction. Panics on an empty list.
    pub fn and_all<I: IntoIterator<Item = Formula>>(parts: I) -> Self {
        parts
            .into_iter()
            .reduce(Formula::and)
            .expect("conjunction of at least one formula")
    }

    /// Left-nested disjunction. Panics on an empty list.
    pub fn or_all<I: IntoIterator<Item = Formula>>(parts: I) -> Self {
        parts
            .into_iter()
            .reduce(Formula::or)
            .expect("disjunction of at least one formula")
    }

    /// `exists v1: exists v2: ... body`
    pub fn exists_all<S: AsRef<str>>(vars: &[S], body: Formula) -> Self {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::exists(v.as_ref(), acc))
    }

    pub fn forall_all<S: AsRef<str>>(vars: &[S], body: Formula) -> Self {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::forall(v.as_ref(), acc))
    }

    /// An unsatisfiable formula: `u = "a" u` has no solution.
    pub fn falsum() -> Self {
        let mut p = Pattern::lit("a");
        p.push_var(UNIVERSE);
        Formula::eq(UNIVERSE, p)
    }

    /// A valid formula: `u = u`.
    pub fn verum() -> Self {
        Formula::eq(UNIVERSE, Pattern::var(UNIVERSE))
    }

    pub fn is_atom(&self) -> bool {
        matches!(
            self,
            Formula::Eq(_)
                | Formula::Constraint { .. }
                | Formula::Rel { .. }
                | Formula::Closure { .. }
                | Formula::Fixpoint { .. }
        )
    }

    /// Immediate subformulas.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Eq(_) | Formula::Constraint { .. } | Formula::Rel { .. } => vec![],
            Formula::And(a, b) | Formula::Or(a, b) => vec![a, b],
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => vec![a],
            Formula::Closure { body, .. } | Formula::Fixpoint { body, .. } => vec![body],
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Flattens nested conjunctions into a list of conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            if let Formula::And(a, b) = f {
                go(a, out);
                go(b, out);
            } else {
                out.push(f);
            }
        }
        go(self, &mut out);
        out
    }

    pub fn disjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            if let Formula::Or(a, b) = f {
                go(a, out);
                go(b, out);
            } else {
                out.push(f);
            }
        }
        go(self, &mut out);
        out
    }

    /// Every variable name occurring anywhere, bound or free, including `u`.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_all_vars(&mut out);
        out
    }

    fn collect_all_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Eq(eq) => {
                out.insert(eq.lhs.clone());
                for v in eq.rhs.variables() {
                    out.insert(v.to_string());
                }
            }
            Formula::Constraint { var, .. } => {
                out.insert(var.clone());
            }
            Formula::Rel { args, .. } => out.extend(args.iter().cloned()),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_all_vars(out);
                b.collect_all_vars(out);
            }
            Formula::Not(a) => a.collect_all_vars(out),
            Formula::Exists(v, a) | Formula::Forall(v, a) => {
                out.insert(v.clone());
                a.collect_all_vars(out);
            }
            Formula::Closure {
                from,
                to,
                body,
                src,
                dst,
                ..
            } => {
                out.extend(from.iter().chain(to).chain(src).chain(dst).cloned());
                body.collect_all_vars(out);
            }
            Formula::Fixpoint {
                vars, body, args, ..
            } => {
                out.extend(vars.iter().chain(args).cloned());
                body.collect_all_vars(out);
            }
        }
    }

    /// Names of relation symbols used in atoms that no enclosing fixpoint binds.
    pub fn free_relations(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeMap<String, usize>) {
            match f {
                Formula::Rel { name, args } => {
                    if !bound.contains(name) {
                        out.insert(name.clone(), args.len());
                    }
                }
                Formula::Fixpoint { rel, body, .. } => {
                    bound.push(rel.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                _ => {
                    for c in f.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Replaces free occurrences of variable `from` by `to`. The caller must
    /// make sure `to` is not captured by a binder on the way down.
    pub fn rename_free(&self, from: &str, to: &str) -> Formula {
        let r = |v: &String| if v == from { to.to_string() } else { v.clone() };
        match self {
            Formula::Eq(eq) => Formula::Eq(WordEquation {
                lhs: r(&eq.lhs),
                rhs: eq.rhs.rename(from, to),
            }),
            Formula::Constraint { var, regex } => Formula::Constraint {
                var: r(var),
                regex: regex.clone(),
            },
            Formula::Rel { name, args } => Formula::Rel {
                name: name.clone(),
                args: args.iter().map(r).collect(),
            },
            Formula::And(a, b) => Formula::and(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Or(a, b) => Formula::or(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Not(a) => Formula::not(a.rename_free(from, to)),
            Formula::Exists(v, a) => {
                if v == from {
                    self.clone()
                } else {
                    Formula::exists(v, a.rename_free(from, to))
                }
            }
            Formula::Forall(v, a) => {
                if v == from {
                    self.clone()
                } else {
                    Formula::forall(v, a.rename_free(from, to))
                }
            }
            Formula::Closure {
                kind,
                from: xs,
                to: ys,
                body,
                src,
                dst,
            } => {
                let bound = xs.iter().chain(ys).any(|v| v == from);
                Formula::Closure {
                    kind: *kind,
                    from: xs.clone(),
                    to: ys.clone(),
                    body: if bound {
                        body.clone()
                    } else {
                        Box::new(body.rename_free(from, to))
                    },
                    src: src.iter().map(r).collect(),
                    dst: dst.iter().map(r).collect(),
                }
            }
            Formula::Fixpoint {
                kind,
                vars,
                rel,
                body,
                args,
            } => Formula::Fixpoint {
                kind: *kind,
                vars: vars.clone(),
                rel: rel.clone(),
                body: if vars.iter().any(|v| v == from) {
                    body.clone()
                } else {
                    Box::new(body.rename_free(from, to))
                },
                args: args.iter().map(r).collect(),
            },
        }
    }
}

/// Generates variable names that avoid a given set of names.
#[derive(Debug, Clone, Default)]
pub struct FreshNames {
    used: BTreeSet<String>,
}

impl FreshNames {
    pub fn new<I: IntoIterator<Item = String>>(used: I) -> Self {
        Self {
            used: used.into_iter().collect(),
        }
    }

    pub fn avoiding(f: &Formula) -> Self {
        Self::new(f.all_vars())
    }

    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    /// A name starting with `_` and `base`, unused so far, now reserved.
    pub fn fresh(&mut self, base: &str) -> String {
        let stem = format!("_{base}");
        if !self.used.contains(&stem) {
            self.used.insert(stem.clone());
            return stem;
        }
        (1..)
            .map(|i| format!("{stem}{i}"))
            .find(|c| !self.used.contains(c))
            .inspect(|c| {
                self.used.insert(c.clone());
            })
            .expect("infinitely many candidates")
    }
}

// ---------------------------------------------------------------------------
// analyses

/// Free variables, with `u` excluded.
pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    let mut out = match f {
        Formula::Eq(eq) => {
            let mut s: BTreeSet<String> = eq.rhs.variables().into_iter().map(String::from).collect();
            s.insert(eq.lhs.clone());
            s
        }
        Formula::Constraint { var, .. } => BTreeSet::from([var.clone()]),
        Formula::Rel { args, .. } => args.iter().cloned().collect(),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let mut s = free_vars(a);
            s.extend(free_vars(b));
            s
        }
        Formula::Not(a) => free_vars(a),
        Formula::Exists(v, a) | Formula::Forall(v, a) => {
            let mut s = free_vars(a);
            s.remove(v);
            s
        }
        Formula::Closure {
            from,
            to,
            body,
            src,
            dst,
            ..
        } => {
            let mut s = free_vars(body);
            for v in from.iter().chain(to) {
                s.remove(v);
            }
            s.extend(src.iter().chain(dst).cloned());
            s
        }
        Formula::Fixpoint {
            vars, body, args, ..
        } => {
            let mut s = free_vars(body);
            for v in vars {
                s.remove(v);
            }
            s.extend(args.iter().cloned());
            s
        }
    };
    out.remove(UNIVERSE);
    out
}

/// Maximum number of free variables of any subformula, bodies of closure and
/// fixpoint operators included.
pub fn width(f: &Formula) -> usize {
    let own = free_vars(f).len();
    f.children()
        .into_iter()
        .map(width)
        .fold(own, usize::max)
}

/// Syntactic features used by a formula.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct FragmentTag {
    pub uses_negation: bool,
    pub uses_universal: bool,
    pub uses_constraints: bool,
    pub uses_closures: bool,
    pub uses_fixpoints: bool,
    /// Some negation is applied to something other than a word equation.
    pub negation_above_atoms: bool,
}

impl FragmentTag {
    /// Existential-positive: neither negation nor universal quantifiers.
    pub fn is_ep(&self) -> bool {
        !self.uses_negation && !self.uses_universal
    }

    /// Existential: no universal quantifiers, negation only on word equations.
    pub fn is_existential(&self) -> bool {
        !self.uses_universal && !self.negation_above_atoms
    }

    /// Plain FC: no constraints, closures, or fixpoints.
    pub fn is_plain_fc(&self) -> bool {
        !self.uses_constraints && !self.uses_closures && !self.uses_fixpoints
    }
}

pub fn classify(f: &Formula) -> FragmentTag {
    let mut tag = FragmentTag::default();
    fn go(f: &Formula, tag: &mut FragmentTag) {
        match f {
            Formula::Not(a) => {
                tag.uses_negation = true;
                if !matches!(**a, Formula::Eq(_)) {
                    tag.negation_above_atoms = true;
                }
            }
            Formula::Forall(..) => tag.uses_universal = true,
            Formula::Constraint { .. } => tag.uses_constraints = true,
            Formula::Closure { .. } => tag.uses_closures = true,
            Formula::Fixpoint { .. } => tag.uses_fixpoints = true,
            _ => {}
        }
        for c in f.children() {
            go(c, tag);
        }
    }
    go(f, &mut tag);
    tag
}

// ---------------------------------------------------------------------------
// printer

fn write_ident_list(f: &mut fmt::Formatter<'_>, vs: &[String]) -> fmt::Result {
    write!(f, "{}", vs.join(", "))
}

pub(crate) fn quote(s: &[char]) -> String {
    let mut out = String::from("\"");
    for &c in s {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.items.is_empty() {
            return write!(f, "\"\"");
        }
        for (i, t) in self.items.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            match t {
                Term::Var(v) => write!(f, "{v}")?,
                Term::Lit(s) => write!(f, "{}", quote(s))?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for WordEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Top,
    Or,
    And,
    Unary,
}

fn needs_parens(node: &Formula, ctx: Prec) -> bool {
    match node {
        Formula::Exists(..) | Formula::Forall(..) => ctx > Prec::Top,
        Formula::Or(..) => ctx > Prec::Or,
        Formula::And(..) => ctx > Prec::And,
        Formula::Eq(_) | Formula::Constraint { .. } => ctx == Prec::Unary,
        _ => false,
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, node: &Formula, ctx: Prec) -> fmt::Result {
    if needs_parens(node, ctx) {
        write!(f, "(")?;
        write_formula(f, node, Prec::Top)?;
        return write!(f, ")");
    }
    match node {
        Formula::Eq(eq) => write!(f, "{eq}"),
        Formula::Constraint { var, regex } => write!(f, "{var} in /{regex}/"),
        Formula::Rel { name, args } => {
            write!(f, "{name}(")?;
            write_ident_list(f, args)?;
            write!(f, ")")
        }
        Formula::And(a, b) => {
            write_formula(f, a, Prec::And)?;
            write!(f, " & ")?;
            // a right operand that is itself a conjunction needs parentheses
            // to survive left-associative parsing
            let ctx = if matches!(**b, Formula::And(..)) {
                Prec::Unary
            } else {
                Prec::And
            };
            write_formula(f, b, ctx)
        }
        Formula::Or(a, b) => {
            write_formula(f, a, Prec::Or)?;
            write!(f, " | ")?;
            let ctx = if matches!(**b, Formula::Or(..)) {
                Prec::Unary
            } else {
                Prec::Or
            };
            write_formula(f, b, ctx)
        }
        Formula::Not(a) => {
            write!(f, "!")?;
            write_formula(f, a, Prec::Unary)
        }
        Formula::Exists(..) | Formula::Forall(..) => {
            let is_exists = matches!(node, Formula::Exists(..));
            let mut vars = Vec::new();
            let mut cur = node;
            loop {
                match (cur, is_exists) {
                    (Formula::Exists(v, b), true) | (Formula::Forall(v, b), false) => {
                        vars.push(v.clone());
                        cur = b;
                    }
                    _ => break,
                }
            }
            write!(f, "{} ", if is_exists { "exists" } else { "forall" })?;
            write_ident_list(f, &vars)?;
            write!(f, ": ")?;
            write_formula(f, cur, Prec::Top)
        }
        Formula::Closure {
            kind,
            from,
            to,
            body,
            src,
            dst,
        } => {
            let kw = match kind {
                ClosureKind::Tc => "tc",
                ClosureKind::Dtc => "dtc",
            };
            write!(f, "{kw}[")?;
            write_ident_list(f, from)?;
            write!(f, "; ")?;
            write_ident_list(f, to)?;
            write!(f, " : ")?;
            write_formula(f, body, Prec::Top)?;
            write!(f, "](")?;
            write_ident_list(f, src)?;
            write!(f, "; ")?;
            write_ident_list(f, dst)?;
            write!(f, ")")
        }
        Formula::Fixpoint {
            kind,
            vars,
            rel,
            body,
            args,
        } => {
            let kw = match kind {
                FixKind::Lfp => "lfp",
                FixKind::Pfp => "pfp",
            };
            write!(f, "{kw}[")?;
            for v in vars {
                write!(f, "{v}, ")?;
            }
            write!(f, "{rel} : ")?;
            write_formula(f, body, Prec::Top)?;
            write!(f, "](")?;
            write_ident_list(f, args)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, Prec::Top)
    }
}

/// Prints a formula in the surface syntax accepted by [`parse`].
pub fn print(f: &Formula) -> String {
    f.to_string()
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: the universe variable u cannot be bound")]
    QuantifiedUniverse { line: usize, col: usize },
    #[error("{line}:{col}: the left side of a word equation must be a single variable")]
    NonVariableLhs { line: usize, col: usize },
    #[error("{line}:{col}: arity mismatch: {message}")]
    ArityMismatch {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: the body of lfp over {rel} must be existential-positive")]
    NonPositiveFixpoint { line: usize, col: usize, rel: String },
    #[error("{line}:{col}: invalid regular expression: {message}")]
    Regex {
        line: usize,
        col: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(Vec<char>),
    Regex(String),
    Sym(char),
    Arrow,
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits source text into tokens. Shared by the formula, Datalog, FO[Eq], and
/// spanner-expression parsers.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        if is_ident_start(c) {
            let mut s = String::new();
            while i < chars.len() && is_ident_char(chars[i]) {
                s.push(chars[i]);
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' || c == '/' {
            let close = c;
            advance(&mut i, &mut line, &mut col, c);
            let mut body = Vec::new();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::Syntax {
                        line: tl,
                        col: tc,
                        message: if close == '"' {
                            "unterminated string".into()
                        } else {
                            "unterminated regular expression".into()
                        },
                    });
                }
                let d = chars[i];
                if d == close {
                    advance(&mut i, &mut line, &mut col, d);
                    break;
                }
                if d == '\\' {
                    if i + 1 >= chars.len() {
                        continue;
                    }
                    let e = chars[i + 1];
                    if close == '"' {
                        if e != '"' && e != '\\' {
                            return Err(SyntaxError::Syntax {
                                line,
                                col,
                                message: format!("unknown escape \\{e} in string"),
                            });
                        }
                        body.push(e);
                    } else if e == '/' {
                        body.push('/');
                    } else {
                        // regex escapes are interpreted by the regex parser
                        body.push('\\');
                        body.push(e);
                    }
                    advance(&mut i, &mut line, &mut col, d);
                    advance(&mut i, &mut line, &mut col, e);
                    continue;
                }
                body.push(d);
                advance(&mut i, &mut line, &mut col, d);
            }
            out.push(Token {
                tok: if close == '"' {
                    Tok::Str(body)
                } else {
                    Tok::Regex(body.into_iter().collect())
                },
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '<' && chars.get(i + 1) == Some(&'-') {
            advance(&mut i, &mut line, &mut col, c);
            advance(&mut i, &mut line, &mut col, '-');
            out.push(Token {
                tok: Tok::Arrow,
                line: tl,
                col: tc,
            });
            continue;
        }
        if "=&|!:,;()[]{}.<".contains(c) {
            advance(&mut i, &mut line, &mut col, c);
            out.push(Token {
                tok: Tok::Sym(c),
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(SyntaxError::Syntax {
            line: tl,
            col: tc,
            message: format!("unexpected character {c:?}"),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Str(s) => write!(f, "string {}", quote(s)),
            Tok::Regex(r) => write!(f, "regular expression /{r}/"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::Arrow => write!(f, "`<-`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

/// Cursor over a token stream with the small helpers every parser needs.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Self { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    pub fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    pub fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let t = self.peek();
        SyntaxError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.error(format!("expected {wanted}, found {}", self.peek().tok))
    }

    pub fn expect_sym(&mut self, c: char) -> Result<Token, SyntaxError> {
        if self.at_sym(c) {
            Ok(self.next())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    pub fn eat_sym(&mut self, c: char) -> bool {
        if self.at_sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    /// A non-keyword identifier.
    pub fn expect_ident(&mut self) -> Result<(String, Token), SyntaxError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                Ok((s, self.next()))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }
}

// ---------------------------------------------------------------------------
// parser

struct Parser {
    cur: Cursor,
    /// arity of relation symbols seen so far, keyed by name
    arities: BTreeMap<String, usize>,
}

fn at(t: &Token) -> (usize, usize) {
    (t.line, t.col)
}

impl Parser {
    fn formula(&mut self) -> Result<Formula, SyntaxError> {
        if self.cur.at_keyword("exists") || self.cur.at_keyword("forall") {
            return self.quantifier();
        }
        self.disjunction()
    }

    fn quantifier(&mut self) -> Result<Formula, SyntaxError> {
        let kw = self.cur.next();
        let is_exists = kw.tok == Tok::Ident("exists".into());
        let mut vars = Vec::new();
        loop {
            let (v, t) = self.cur.expect_ident()?;
            if is_universe(&v) {
                return Err(SyntaxError::QuantifiedUniverse {
                    line: t.line,
                    col: t.col,
                });
            }
            vars.push(v);
            if !self.cur.eat_sym(',') {
                break;
            }
        }
        self.cur.expect_sym(':')?;
        let body = self.formula()?;
        Ok(if is_exists {
            Formula::exists_all(&vars, body)
        } else {
            Formula::forall_all(&vars, body)
        })
    }

    fn disjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut f = self.conjunction()?;
        while self.cur.eat_sym('|') {
            let g = self.conjunction()?;
            f = Formula::or(f, g);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut f = self.unary()?;
        while self.cur.eat_sym('&') {
            let g = self.unary()?;
            f = Formula::and(f, g);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        if self.cur.eat_sym('!') {
            return Ok(Formula::not(self.unary()?));
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

    fn ident_list(&mut self, allow_empty: bool) -> Result<Vec<(String, Token)>, SyntaxError> {
        let mut out = Vec::new();
        if allow_empty && !matches!(self.cur.peek().tok, Tok::Ident(_)) {
            return Ok(out);
        }
        loop {
            out.push(self.cur.expect_ident()?);
            if !self.cur.eat_sym(',') {
                break;
            }
        }
        Ok(out)
    }

    fn note_arity(&mut self, name: &str, arity: usize, t: &Token) -> Result<(), SyntaxError> {
        match self.arities.get(name) {
            Some(&a) if a != arity => Err(SyntaxError::ArityMismatch {
                line: t.line,
                col: t.col,
                message: format!("{name} is used with arity {a} and {arity}"),
            }),
            _ => {
                self.arities.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    fn atom(&mut self) -> Result<Formula, SyntaxError> {
        let t = self.cur.peek().clone();
        match &t.tok {
            Tok::Ident(kw) if kw == "tc" || kw == "dtc" => {
                self.cur.next();
                self.closure(if kw == "tc" {
                    ClosureKind::Tc
                } else {
                    ClosureKind::Dtc
                }, &t)
            }
            Tok::Ident(kw) if kw == "lfp" || kw == "pfp" => {
                self.cur.next();
                self.fixpoint(if kw == "lfp" { FixKind::Lfp } else { FixKind::Pfp }, &t)
            }
            Tok::Str(_) => {
                let (line, col) = at(&t);
                self.pattern()?;
                if self.cur.at_sym('=') {
                    Err(SyntaxError::NonVariableLhs { line, col })
                } else {
                    Err(SyntaxError::Syntax {
                        line,
                        col,
                        message: "a terminal word cannot stand alone".into(),
                    })
                }
            }
            Tok::Ident(_) => {
                let (name, _) = self.cur.expect_ident()?;
                if self.cur.at_sym('(') {
                    self.cur.next();
                    let args: Vec<String> =
                        self.ident_list(true)?.into_iter().map(|(s, _)| s).collect();
                    self.cur.expect_sym(')')?;
                    self.note_arity(&name, args.len(), &t)?;
                    return Ok(Formula::Rel { name, args });
                }
                if self.cur.at_keyword("in") {
                    self.cur.next();
                    let rt = self.cur.next();
                    let Tok::Regex(src) = &rt.tok else {
                        return Err(SyntaxError::Syntax {
                            line: rt.line,
                            col: rt.col,
                            message: format!("expected a regular expression, found {}", rt.tok),
                        });
                    };
                    let regex = Regex::parse(src).map_err(|e| SyntaxError::Regex {
                        line: rt.line,
                        col: rt.col + 1 + e.position,
                        message: e.message,
                    })?;
                    return Ok(Formula::Constraint { var: name, regex });
                }
                if self.cur.at_sym('=') {
                    self.cur.next();
                    let rhs = self.pattern()?;
                    return Ok(Formula::eq(&name, rhs));
                }
                if matches!(self.cur.peek().tok, Tok::Ident(_) | Tok::Str(_)) {
                    // something like `x y = ...`
                    self.pattern()?;
                    if self.cur.at_sym('=') {
                        return Err(SyntaxError::NonVariableLhs {
                            line: t.line,
                            col: t.col,
                        });
                    }
                }
                Err(self.cur.unexpected("`=`, `in`, or `(` after a variable"))
            }
            _ => Err(self.cur.unexpected("a formula")),
        }
    }

    fn pattern(&mut self) -> Result<Pattern, SyntaxError> {
        let mut p = Pattern::new();
        let mut any = false;
        loop {
            match &self.cur.peek().tok {
                Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                    // `R(` starts a relation atom, which cannot be part of a pattern
                    if self.cur.peek_at(1) == &Tok::Sym('(') {
                        break;
                    }
                    p.push_var(s);
                }
                Tok::Str(s) => p.push_lit(s),
                _ => break,
            }
            any = true;
            self.cur.next();
        }
        if !any {
            return Err(self.cur.unexpected("a pattern"));
        }
        Ok(p)
    }

    fn closure(&mut self, kind: ClosureKind, kw: &Token) -> Result<Formula, SyntaxError> {
        self.cur.expect_sym('[')?;
        let from = self.ident_list(false)?;
        self.cur.expect_sym(';')?;
        let to = self.ident_list(false)?;
        self.cur.expect_sym(':')?;
        let body = self.formula()?;
        self.cur.expect_sym(']')?;
        self.cur.expect_sym('(')?;
        let src = self.ident_list(false)?;
        self.cur.expect_sym(';')?;
        let dst = self.ident_list(false)?;
        self.cur.expect_sym(')')?;
        for (v, t) in from.iter().chain(&to) {
            if is_universe(v) {
                return Err(SyntaxError::QuantifiedUniverse {
                    line: t.line,
                    col: t.col,
                });
            }
        }
        let k = from.len();
        if to.len() != k || src.len() != k || dst.len() != k {
            return Err(SyntaxError::ArityMismatch {
                line: kw.line,
                col: kw.col,
                message: format!(
                    "closure tuples have lengths {}, {}, {}, {}",
                    k,
                    to.len(),
                    src.len(),
                    dst.len()
                ),
            });
        }
        let binders: BTreeSet<&String> = from.iter().chain(&to).map(|(v, _)| v).collect();
        if binders.len() != 2 * k {
            return Err(SyntaxError::Syntax {
                line: kw.line,
                col: kw.col,
                message: "closure variables must be pairwise distinct".into(),
            });
        }
        let names = |v: Vec<(String, Token)>| v.into_iter().map(|(s, _)| s).collect();
        Ok(Formula::Closure {
            kind,
            from: names(from),
            to: names(to),
            body: Box::new(body),
            src: names(src),
            dst: names(dst),
        })
    }

    fn fixpoint(&mut self, kind: FixKind, kw: &Token) -> Result<Formula, SyntaxError> {
        self.cur.expect_sym('[')?;
        let mut vars = self.ident_list(false)?;
        let (rel, rel_tok) = vars.pop().expect("ident_list is non-empty");
        self.cur.expect_sym(':')?;
        // the relation symbol is local to the operator
        let saved = self.arities.remove(&rel);
        self.arities.insert(rel.clone(), vars.len());
        let body = self.formula()?;
        match saved {
            Some(a) => self.arities.insert(rel.clone(), a),
            None => self.arities.remove(&rel),
        };
        self.cur.expect_sym(']')?;
        self.cur.expect_sym('(')?;
        let args = self.ident_list(true)?;
        let close = self.cur.expect_sym(')')?;
        for (v, t) in &vars {
            if is_universe(v) {
                return Err(SyntaxError::QuantifiedUniverse {
                    line: t.line,
                    col: t.col,
                });
            }
        }
        if args.len() != vars.len() {
            return Err(SyntaxError::ArityMismatch {
                line: close.line,
                col: close.col,
                message: format!(
                    "{rel} has arity {} but is applied to {} arguments",
                    vars.len(),
                    args.len()
                ),
            });
        }
        let distinct: BTreeSet<&String> = vars.iter().map(|(v, _)| v).collect();
        if distinct.len() != vars.len() {
            return Err(SyntaxError::Syntax {
                line: kw.line,
                col: kw.col,
                message: "fixpoint variables must be pairwise distinct".into(),
            });
        }
        if kind == FixKind::Lfp && !classify(&body).is_ep() {
            return Err(SyntaxError::NonPositiveFixpoint {
                line: rel_tok.line,
                col: rel_tok.col,
                rel,
            });
        }
        Ok(Formula::Fixpoint {
            kind,
            vars: vars.into_iter().map(|(s, _)| s).collect(),
            rel,
            body: Box::new(body),
            args: args.into_iter().map(|(s, _)| s).collect(),
        })
    }
}

/// Parses one atomic formula at the cursor.
pub(crate) fn parse_atom(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    let mut p = Parser {
        cur: std::mem::replace(cur, Cursor::new(Vec::new())),
        arities: BTreeMap::new(),
    };
    let r = p.atom();
    *cur = p.cur;
    r
}

/// Parses a formula in the surface syntax.
pub fn parse(text: &str) -> Result<Formula, SyntaxError> {
    let mut p = Parser {
        cur: Cursor::new(tokenize(text)?),
        arities: BTreeMap::new(),
    };
    let f = p.formula()?;
    if !p.cur.at_eof() {
        return Err(p.cur.unexpected("end of input"));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    #[test]
    fn parses_square() {
        let f = p("exists x: u = x x");
        assert_eq!(
            f,
            Formula::exists("x", Formula::eq("u", Pattern::vars(&["x", "x"])))
        );
        assert_eq!(print(&f), "exists x: u = x x");
    }

    #[test]
    fn parses_example_3_5_phi2() {
        let f = p(r#"exists x: x = "papaya" | x = "banana""#);
        let Formula::Exists(x, body) = &f else {
            panic!()
        };
        assert_eq!(x, "x");
        assert!(matches!(**body, Formula::Or(..)));
        assert!(classify(&f).is_ep());
    }

    #[test]
    fn rejects_bound_universe() {
        assert!(matches!(
            parse("forall u: u = u"),
            Err(SyntaxError::QuantifiedUniverse { line: 1, col: 8 })
        ));
        assert!(matches!(
            parse("tc[u; y : y = u](x; y)"),
            Err(SyntaxError::QuantifiedUniverse { .. })
        ));
    }

    #[test]
    fn distinct_semantic_errors() {
        assert!(matches!(
            parse(r#""a" = x"#),
            Err(SyntaxError::NonVariableLhs { .. })
        ));
        assert!(matches!(
            parse("x y = z"),
            Err(SyntaxError::NonVariableLhs { .. })
        ));
        assert!(matches!(
            parse("tc[x; y : x = y](s; t, r)"),
            Err(SyntaxError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse("lfp[x, R : R(x) | !x = x](y)"),
            Err(SyntaxError::NonPositiveFixpoint { .. })
        ));
        assert!(matches!(
            parse("lfp[x, R : R(x, x)](y)"),
            Err(SyntaxError::ArityMismatch { .. })
        ));
        assert!(matches!(parse("x = "), Err(SyntaxError::Syntax { .. })));
        assert!(matches!(parse("x in /a(/"), Err(SyntaxError::Regex { .. })));
    }

    #[test]
    fn error_positions_are_line_and_column() {
        let e = parse("exists x:\n  u = x &").unwrap_err();
        assert!(matches!(e, SyntaxError::Syntax { line: 2, .. }), "{e}");
    }

    #[test]
    fn free_vars_examples() {
        let phi1 = p("exists p1, p2, s1, s2: (u = p1 x s1 & u = p2 x s2 & !p1 = p2)");
        assert_eq!(free_vars(&phi1), BTreeSet::from(["x".to_string()]));
        assert!(free_vars(&p(r#"u = "ab""#)).is_empty());
        let tc = p("tc[x; y : x = y \"a\"](s; t)");
        assert_eq!(
            free_vars(&tc),
            BTreeSet::from(["s".to_string(), "t".to_string()])
        );
        let lfp = p("lfp[x, R : x = \"\" | exists y: (x = y \"a\" & R(y))](z)");
        assert_eq!(free_vars(&lfp), BTreeSet::from(["z".to_string()]));
    }

    #[test]
    fn width_examples() {
        assert_eq!(width(&p(r#"x = """#)), 1);
        let stripped = p("u = p1 x s1 & u = p2 x s2 & !p1 = p2");
        assert_eq!(width(&stripped), 5);
        assert_eq!(width(&p("exists x: u = x x")), 1);
        let psi = p("exists y: (x = y y & exists x: y = x x)");
        assert_eq!(width(&psi), 2);
    }

    #[test]
    fn classify_examples() {
        let strict = p(r#"exists z: y = x z & !x = y"#);
        assert!(!classify(&strict).is_ep());
        assert!(classify(&strict).is_existential());
        let positive = p(r#"exists z: (y = x z & exists y: (z = "a" y | z = "b" y))"#);
        assert!(classify(&positive).is_ep());
        assert!(!classify(&p("forall x: x = x")).is_existential());
    }

    #[test]
    fn printer_minimal_parentheses() {
        let f = p("!(x = y | exists z: x = z) & (a = b | c = d)");
        let s = print(&f);
        assert_eq!(s, "!(x = y | (exists z: x = z)) & (a = b | c = d)");
        assert_eq!(parse(&s).unwrap(), f);
        let g = p("a = b | (c = d | e = f)");
        assert_eq!(print(&g), "a = b | (c = d | e = f)");
        assert_eq!(parse(&print(&g)).unwrap(), g);
        let h = p(r#"!(x = "")"#);
        assert_eq!(print(&h), r#"!(x = "")"#);
    }

    #[test]
    fn round_trip_operators() {
        for s in [
            r#"exists x, y: u = x "a\"b" y & x in /(ab)*|S\/\0/"#,
            "forall x: exists y: (x = y | !(y = x))",
            "tc[x1, x2; y1, y2 : x1 = y1 & x2 = y2](a, b; c, d)",
            r#"lfp[x, y, R : x = "" & y = "" | exists a, b: (R(a, b) & x = a "a" & y = b "b")](s, t)"#,
            "pfp[R : !R()]()",
            "dtc[x; y : x = y](u; z)",
        ] {
            let f = p(s);
            let printed = print(&f);
            assert_eq!(parse(&printed).unwrap(), f, "{s} -> {printed}");
        }
    }

    #[test]
    fn pattern_merges_literals() {
        let f = p(r#"x = "a" "b" "" y "c""#);
        let Formula::Eq(eq) = f else { panic!() };
        assert_eq!(eq.rhs.items().len(), 3);
        assert_eq!(eq.rhs.terminal_len(), 3);
    }

    #[test]
    fn fresh_names_avoid_used() {
        let mut fresh = FreshNames::avoiding(&p("_z = _z1"));
        assert_eq!(fresh.fresh("z"), "_z2");
        assert_eq!(fresh.fresh("y"), "_y");
        assert_eq!(fresh.fresh("y"), "_y1");
    }
}
