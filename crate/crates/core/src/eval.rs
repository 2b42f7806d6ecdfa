//! Evaluation of FC formulas on a single host word.
//!
//! Two engines share one interface. [`NaiveEngine`] follows the satisfaction
//! relation literally: quantifiers enumerate every factor, and a formula's
//! relation is obtained by trying every assignment of its free variables. It is
//! the reference against which everything else is tested. [`BottomUpEngine`]
//! materialises one table per subformula, joining conjunctions, complementing
//! negations and projecting quantifiers, so that no table is ever larger than
//! `|Fac(w)|^k` for `k` the width of the formula.
//!
//! Both engines delegate closure and fixpoint operators to [`crate::fixpoint`]
//! through the [`Evaluator`] trait.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

use crate::fixpoint;
use crate::regexlang::{Matcher, Regex};
use crate::relation::{Bindings, Relation, Substitution, TupleSet};
use crate::syntax::{free_vars, is_universe, Formula, Term, WordEquation};
use crate::word::{FactorIndex, FactorRef, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is free in the formula but has no value")]
    UnboundVariable(String),
    #[error("relation symbol `{0}` has no interpretation")]
    UnknownRelation(String),
    #[error("relation `{name}` has arity {expected} but is used with {found} arguments")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("intermediate result would exceed {limit} rows")]
    RowLimit { limit: usize },
    #[error("formula nesting exceeds the depth limit of {0}")]
    DepthLimit(usize),
    #[error("fixpoint iteration exceeded {0} stages")]
    StageLimit(usize),
    #[error("least fixpoint stages are not increasing for `{0}`")]
    NotMonotone(String),
}

/// Resource limits for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Largest table (or naive result) that may be built.
    pub max_rows: usize,
    /// Deepest recursion into the formula.
    pub max_depth: usize,
    /// Most stages of one fixpoint iteration.
    pub max_stages: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_rows: 20_000_000,
            max_depth: 10_000,
            max_stages: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Naive,
    BottomUp,
}

/// Counters collected during one evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvalStats {
    /// Largest table built, in rows.
    pub max_rows: usize,
    /// Number of tables built.
    pub tables: usize,
    /// Number of fixpoint stages computed.
    pub stages: usize,
}

/// Outcome of checking one substitution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// variable environments

/// A stack of variable bindings; later entries shadow earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: Vec<(String, FactorRef)>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bindings(b: &Bindings) -> Self {
        Self {
            vars: b.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }

    pub fn get(&self, v: &str) -> Option<FactorRef> {
        self.vars.iter().rev().find(|(n, _)| n == v).map(|&(_, f)| f)
    }

    pub fn contains(&self, v: &str) -> bool {
        self.vars.iter().any(|(n, _)| n == v)
    }

    pub fn push(&mut self, v: &str, f: FactorRef) {
        self.vars.push((v.to_string(), f));
    }

    fn set_top(&mut self, f: FactorRef) {
        self.vars.last_mut().expect("non-empty environment").1 = f;
    }

    pub fn pop(&mut self) {
        self.vars.pop();
    }

    /// A copy with `v` removed, for evaluating under a binder of `v`.
    pub fn without(&self, v: &str) -> Env {
        Env {
            vars: self.vars.iter().filter(|(n, _)| n != v).cloned().collect(),
        }
    }

    /// A copy holding only the given variables.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Env {
        let mut out = Env::new();
        for v in keep {
            if let Some(f) = self.get(v) {
                out.push(v, f);
            }
        }
        out
    }

    pub fn to_bindings(&self) -> Bindings {
        self.vars.iter().cloned().collect()
    }
}

// ---------------------------------------------------------------------------
// state shared by both engines

type FixKey = (usize, Vec<FactorRef>, u64);

/// Caches and counters common to both engines. Caches keyed by node address
/// are cleared at the start of every top-level call.
pub struct Core<'w> {
    pub idx: &'w FactorIndex,
    pub config: EvalConfig,
    pub stats: EvalStats,
    rels: HashMap<String, (usize, Rc<TupleSet>)>,
    generation: u64,
    free: HashMap<usize, Rc<BTreeSet<String>>>,
    rel_free: HashMap<usize, bool>,
    matchers: HashMap<usize, Rc<Matcher>>,
    pub(crate) fix_tuples: HashMap<FixKey, Rc<TupleSet>>,
    pub(crate) fix_graphs: HashMap<FixKey, Rc<fixpoint::Graph>>,
}

impl<'w> Core<'w> {
    fn new(idx: &'w FactorIndex, config: EvalConfig) -> Self {
        Self {
            idx,
            config,
            stats: EvalStats::default(),
            rels: HashMap::new(),
            generation: 0,
            free: HashMap::new(),
            rel_free: HashMap::new(),
            matchers: HashMap::new(),
            fix_tuples: HashMap::new(),
            fix_graphs: HashMap::new(),
        }
    }

    fn reset(&mut self) {
        self.free.clear();
        self.rel_free.clear();
        self.matchers.clear();
        self.fix_tuples.clear();
        self.fix_graphs.clear();
    }

    /// Free variables of `f` (without `u`), cached per node.
    pub fn free(&mut self, f: &Formula) -> Rc<BTreeSet<String>> {
        let key = f as *const Formula as usize;
        self.free
            .entry(key)
            .or_insert_with(|| Rc::new(free_vars(f)))
            .clone()
    }

    /// Whether `f` mentions a relation symbol it does not bind itself.
    pub fn uses_outer_relations(&mut self, f: &Formula) -> bool {
        let key = f as *const Formula as usize;
        *self
            .rel_free
            .entry(key)
            .or_insert_with(|| !f.free_relations().is_empty())
    }

    fn matcher(&mut self, f: &Formula, r: &Regex) -> Rc<Matcher> {
        let key = f as *const Formula as usize;
        self.matchers
            .entry(key)
            .or_insert_with(|| Rc::new(r.compile()))
            .clone()
    }

    /// Current interpretation of a relation symbol.
    pub fn relation(&self, name: &str) -> Result<(usize, Rc<TupleSet>), EvalError> {
        self.rels
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownRelation(name.to_string()))
    }

    /// Interprets a relation symbol, returning the previous interpretation.
    pub fn bind_relation(
        &mut self,
        name: &str,
        arity: usize,
        tuples: Rc<TupleSet>,
    ) -> Option<(usize, Rc<TupleSet>)> {
        self.generation += 1;
        self.rels.insert(name.to_string(), (arity, tuples))
    }

    /// Undoes [`Core::bind_relation`].
    pub fn restore_relation(&mut self, name: &str, prev: Option<(usize, Rc<TupleSet>)>) {
        self.generation += 1;
        match prev {
            Some(p) => {
                self.rels.insert(name.to_string(), p);
            }
            None => {
                self.rels.remove(name);
            }
        }
    }

    /// Changes whenever any relation interpretation changes.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Records a table of `rows` rows, failing if it exceeds the limit.
    pub fn record_rows(&mut self, rows: usize) -> Result<(), EvalError> {
        self.stats.tables += 1;
        self.stats.max_rows = self.stats.max_rows.max(rows);
        if rows > self.config.max_rows {
            return Err(EvalError::RowLimit {
                limit: self.config.max_rows,
            });
        }
        Ok(())
    }

    /// Fails early if a table of `|Fac|^k` rows would exceed the limit.
    pub fn guard_power(&self, k: usize) -> Result<(), EvalError> {
        let n = self.idx.factor_count() as f64;
        if n.powi(k as i32) > self.config.max_rows as f64 {
            return Err(EvalError::RowLimit {
                limit: self.config.max_rows,
            });
        }
        Ok(())
    }

    fn check_depth(&self, depth: usize) -> Result<(), EvalError> {
        if depth > self.config.max_depth {
            return Err(EvalError::DepthLimit(self.config.max_depth));
        }
        Ok(())
    }
}

/// An engine that can compute the relation defined by a formula.
pub trait Evaluator<'w> {
    fn core(&mut self) -> &mut Core<'w>;

    /// The relation defined by `f` over its free variables that `fixed` does
    /// not bind, with the variables in `fixed` held at their values.
    fn relation_under(
        &mut self,
        f: &Formula,
        fixed: &Env,
        depth: usize,
    ) -> Result<Relation, EvalError>;
}

// ---------------------------------------------------------------------------
// word equations

fn lookup(idx: &FactorIndex, env: &Env, v: &str) -> Result<FactorRef, EvalError> {
    if is_universe(v) {
        return Ok(idx.whole());
    }
    env.get(v)
        .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))
}

/// Whether the factor `value` occurs at 1-based position `pos` of the word.
fn occurs_at(idx: &FactorIndex, pos: usize, value: FactorRef) -> bool {
    value.len == 0 || idx.oracle().lce(pos, value.start as usize) >= value.len as usize
}

fn literal_at(idx: &FactorIndex, pos: usize, lit: &[char]) -> bool {
    let s = idx.word().symbols();
    pos + lit.len() <= s.len() + 1 && &s[pos - 1..pos - 1 + lit.len()] == lit
}

/// Checks `target = items` where every variable has a value.
fn pattern_matches(
    idx: &FactorIndex,
    target: FactorRef,
    items: &[Term],
    get: &dyn Fn(&str) -> Result<FactorRef, EvalError>,
) -> Result<bool, EvalError> {
    let mut p = 0usize;
    let len = target.len as usize;
    for t in items {
        match t {
            Term::Var(v) => {
                let f = get(v)?;
                let l = f.len as usize;
                if p + l > len || !occurs_at(idx, target.start as usize + p, f) {
                    return Ok(false);
                }
                p += l;
            }
            Term::Lit(cs) => {
                if p + cs.len() > len || !literal_at(idx, target.start as usize + p, cs) {
                    return Ok(false);
                }
                p += cs.len();
            }
        }
    }
    Ok(p == len)
}

fn eq_holds(idx: &FactorIndex, eq: &WordEquation, env: &Env) -> Result<bool, EvalError> {
    let target = lookup(idx, env, &eq.lhs)?;
    pattern_matches(idx, target, eq.rhs.items(), &|v| lookup(idx, env, v))
}

/// The value of a pattern whose variables all have values, if it is a factor.
fn pattern_value(
    idx: &FactorIndex,
    items: &[Term],
    get: &dyn Fn(&str) -> Result<FactorRef, EvalError>,
) -> Result<Option<FactorRef>, EvalError> {
    let mut text = Vec::new();
    for t in items {
        match t {
            Term::Var(v) => text.extend_from_slice(idx.word().slice(get(v)?)),
            Term::Lit(cs) => text.extend_from_slice(cs),
        }
    }
    Ok(idx.find(&text))
}

/// All solutions of a word equation in the factors of the indexed word, as a
/// relation over the equation's variables other than `u` and those in `fixed`.
///
/// The left-hand side is anchored first (the whole word for `u`, its value if
/// fixed, every factor otherwise); the right-hand side is then matched left to
/// right, trying every length for each unbound variable.
pub fn solve_equation_in(
    idx: &FactorIndex,
    eq: &WordEquation,
    fixed: &Env,
) -> Result<Relation, EvalError> {
    let resolved = |v: &str| -> Option<FactorRef> {
        if is_universe(v) {
            Some(idx.whole())
        } else {
            fixed.get(v)
        }
    };
    let mut scheme: Vec<String> = eq
        .variables()
        .into_iter()
        .filter(|v| resolved(v).is_none())
        .map(String::from)
        .collect();
    scheme.sort();
    let items = eq.rhs.items();
    let col = |v: &str| scheme.iter().position(|s| s == v);

    // minimum length still to be consumed from item i on
    let mut min_rest = vec![0usize; items.len() + 1];
    for i in (0..items.len()).rev() {
        let here = match &items[i] {
            Term::Lit(cs) => cs.len(),
            Term::Var(v) => resolved(v).map_or(0, |f| f.len as usize),
        };
        min_rest[i] = min_rest[i + 1] + here;
    }

    let lhs_value = resolved(&eq.lhs);
    let rhs_resolved = items.iter().all(|t| match t {
        Term::Var(v) => resolved(v).is_some(),
        Term::Lit(_) => true,
    });
    if rhs_resolved {
        let value = pattern_value(idx, items, &|v| Ok(resolved(v).unwrap()))?;
        let rows = match (value, lhs_value) {
            (None, _) => Vec::new(),
            (Some(val), Some(l)) => {
                if val == l {
                    vec![Vec::new()]
                } else {
                    Vec::new()
                }
            }
            (Some(val), None) => vec![vec![val]],
        };
        return Ok(Relation::from_rows(&scheme, rows));
    }

    struct Search<'a> {
        idx: &'a FactorIndex,
        items: &'a [Term],
        min_rest: &'a [usize],
        target: FactorRef,
        lhs_col: Option<usize>,
        cols: Vec<Option<usize>>,
        fixed: Vec<Option<FactorRef>>,
        assigned: Vec<Option<FactorRef>>,
        rows: Vec<Vec<FactorRef>>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, p: usize) {
            let len = self.target.len as usize;
            if i == self.items.len() {
                if p == len {
                    self.rows
                        .push(self.assigned.iter().map(|a| a.unwrap()).collect());
                }
                return;
            }
            if p + self.min_rest[i] > len {
                return;
            }
            let pos = self.target.start as usize + p;
            match &self.items[i] {
                Term::Lit(cs) => {
                    if literal_at(self.idx, pos, cs) {
                        self.go(i + 1, p + cs.len());
                    }
                }
                Term::Var(_) => {
                    let known = match (self.fixed[i], self.cols[i]) {
                        (Some(f), _) => Some(f),
                        (None, Some(c)) => self.assigned[c],
                        (None, None) => unreachable!("variable is either fixed or a column"),
                    };
                    if let Some(f) = known {
                        let l = f.len as usize;
                        if p + l <= len && occurs_at(self.idx, pos, f) {
                            self.go(i + 1, p + l);
                        }
                        return;
                    }
                    let c = self.cols[i].unwrap();
                    let max = len - p - self.min_rest[i + 1];
                    for l in 0..=max {
                        let f = self.idx.canonicalize(FactorRef::new(pos, l));
                        self.assigned[c] = Some(f);
                        self.go(i + 1, p + l);
                    }
                    self.assigned[c] = None;
                }
            }
        }
    }

    let lhs_col = if lhs_value.is_none() { col(&eq.lhs) } else { None };
    let mut search = Search {
        idx,
        items,
        min_rest: &min_rest,
        target: FactorRef::EMPTY,
        lhs_col,
        cols: items
            .iter()
            .map(|t| match t {
                Term::Var(v) => col(v),
                Term::Lit(_) => None,
            })
            .collect(),
        fixed: items
            .iter()
            .map(|t| match t {
                Term::Var(v) => resolved(v),
                Term::Lit(_) => None,
            })
            .collect(),
        assigned: vec![None; scheme.len()],
        rows: Vec::new(),
    };
    let targets: Vec<FactorRef> = match lhs_value {
        Some(f) => vec![f],
        None => idx.factors().to_vec(),
    };
    for t in targets {
        if (t.len as usize) < min_rest[0] {
            continue;
        }
        search.target = t;
        if let Some(c) = search.lhs_col {
            search.assigned[c] = Some(t);
        }
        search.go(0, 0);
    }
    Ok(Relation::from_rows(&scheme, search.rows))
}

/// All solutions of `eq` in the factors of `w`, with the variables in `fixed`
/// held at their values.
pub fn solve_equation(
    eq: &WordEquation,
    w: &Word,
    fixed: &Bindings,
) -> Result<Relation, EvalError> {
    let idx = FactorIndex::new(w.clone());
    solve_equation_in(&idx, eq, &Env::from_bindings(fixed))
}

/// Binds the positions of `args` to the tuples of a relation, as a relation
/// over the arguments other than `u` and those in `fixed`.
pub(crate) fn bind_tuples<'t>(
    idx: &FactorIndex,
    tuples: impl IntoIterator<Item = &'t Vec<FactorRef>>,
    args: &[String],
    fixed: &Env,
) -> Relation {
    let mut scheme: Vec<String> = args
        .iter()
        .filter(|a| !is_universe(a) && fixed.get(a).is_none())
        .cloned()
        .collect();
    scheme.sort();
    scheme.dedup();
    let whole = idx.whole();
    let pos: Vec<Result<usize, Option<FactorRef>>> = args
        .iter()
        .map(|a| {
            if is_universe(a) {
                Err(Some(whole))
            } else if let Some(f) = fixed.get(a) {
                Err(Some(f))
            } else {
                Ok(scheme.binary_search(a).unwrap())
            }
        })
        .collect();
    let mut rows = Vec::new();
    'tuples: for t in tuples {
        let mut row: Vec<Option<FactorRef>> = vec![None; scheme.len()];
        for (i, p) in pos.iter().enumerate() {
            match *p {
                Err(Some(f)) => {
                    if t[i] != f {
                        continue 'tuples;
                    }
                }
                Err(None) => unreachable!(),
                Ok(c) => match row[c] {
                    Some(f) if f != t[i] => continue 'tuples,
                    _ => row[c] = Some(t[i]),
                },
            }
        }
        rows.push(row.into_iter().map(Option::unwrap).collect());
    }
    Relation::from_rows(&scheme, rows)
}

/// Splits a chain of like quantifiers into its variables (innermost
/// occurrence kept when a name repeats) and its body.
fn quantifier_block(f: &Formula) -> (Vec<&str>, &Formula, bool) {
    let universal = matches!(f, Formula::Forall(..));
    let mut vars = Vec::new();
    let mut cur = f;
    loop {
        match cur {
            Formula::Exists(v, b) if !universal => {
                vars.push(v.as_str());
                cur = b;
            }
            Formula::Forall(v, b) if universal => {
                vars.push(v.as_str());
                cur = b;
            }
            _ => break,
        }
    }
    let mut dedup: Vec<&str> = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        if !vars[i + 1..].contains(v) {
            dedup.push(v);
        }
    }
    (dedup, cur, universal)
}

// ---------------------------------------------------------------------------
// naive engine

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// stop at the first assignment satisfying every part
    Exists,
    /// stop at the first assignment falsifying every part
    Forall,
    /// visit every assignment satisfying every part
    Collect,
}

/// Assignment order for a block of variables and the parts that become
/// checkable after each assignment.
struct Plan<'f> {
    order: Vec<String>,
    checks: Vec<Vec<&'f Formula>>,
    determined: Vec<Option<&'f WordEquation>>,
}

/// The reference evaluator: every quantifier ranges over all factors.
///
/// Quantifier blocks assign their variables one at a time and check each
/// conjunct (or, under a universal block, each disjunct) as soon as all of its
/// variables have values. A variable that is the left side of a conjunct
/// `x = α` whose right side is already known has only one candidate, the value
/// of `α`.
pub struct NaiveEngine<'w> {
    core: Core<'w>,
}

impl<'w> NaiveEngine<'w> {
    pub fn new(idx: &'w FactorIndex, config: EvalConfig) -> Self {
        Self {
            core: Core::new(idx, config),
        }
    }

    pub fn stats(&self) -> &EvalStats {
        &self.core.stats
    }

    /// Interprets a relation symbol for subsequent calls.
    pub fn set_relation(&mut self, name: &str, arity: usize, tuples: TupleSet) {
        self.core.bind_relation(name, arity, Rc::new(tuples));
    }

    /// Whether `(w, σ) ⊨ f`, where every free variable of `f` must be bound.
    pub fn holds(&mut self, f: &Formula, bindings: &Bindings) -> Result<bool, EvalError> {
        self.core.reset();
        for v in free_vars(f) {
            if !bindings.contains_key(&v) {
                return Err(EvalError::UnboundVariable(v));
            }
        }
        let mut env = Env::from_bindings(bindings);
        self.holds_in(f, &mut env, 0)
    }

    /// The relation defined by `f` over all of its free variables.
    pub fn relation(&mut self, f: &Formula) -> Result<Relation, EvalError> {
        self.relation_with(f, &Bindings::new())
    }

    /// The relation defined by `f` over its free variables not in `fixed`.
    pub fn relation_with(&mut self, f: &Formula, fixed: &Bindings) -> Result<Relation, EvalError> {
        self.core.reset();
        self.relation_under(f, &Env::from_bindings(fixed), 0)
    }

    fn holds_in(&mut self, f: &Formula, env: &mut Env, depth: usize) -> Result<bool, EvalError> {
        self.core.check_depth(depth)?;
        let idx = self.core.idx;
        match f {
            Formula::Eq(eq) => eq_holds(idx, eq, env),
            Formula::Constraint { var, regex } => {
                let v = lookup(idx, env, var)?;
                let m = self.core.matcher(f, regex);
                Ok(m.matches(idx.word().slice(v)))
            }
            Formula::Rel { name, args } => {
                let (arity, tuples) = self.core.relation(name)?;
                if arity != args.len() {
                    return Err(EvalError::ArityMismatch {
                        name: name.clone(),
                        expected: arity,
                        found: args.len(),
                    });
                }
                let t = args
                    .iter()
                    .map(|a| lookup(idx, env, a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(tuples.contains(&t))
            }
            Formula::And(a, b) => Ok(self.holds_in(a, env, depth + 1)? && self.holds_in(b, env, depth + 1)?),
            Formula::Or(a, b) => Ok(self.holds_in(a, env, depth + 1)? || self.holds_in(b, env, depth + 1)?),
            Formula::Not(a) => Ok(!self.holds_in(a, env, depth + 1)?),
            Formula::Exists(..) | Formula::Forall(..) => {
                let (vars, body, universal) = quantifier_block(f);
                let parts = if universal {
                    body.disjuncts()
                } else {
                    body.conjuncts()
                };
                let mode = if universal { Mode::Forall } else { Mode::Exists };
                let plan = self.plan(&vars, &parts, mode);
                let stopped = self.search(&plan, 0, env, mode, depth + 1, &mut |_| {})?;
                Ok(if universal { !stopped } else { stopped })
            }
            Formula::Closure { .. } | Formula::Fixpoint { .. } => {
                for v in self.core.free(f).iter() {
                    lookup(idx, env, v)?;
                }
                let r = fixpoint::node_relation(self, f, env, depth + 1)?;
                Ok(!r.is_empty())
            }
        }
    }

    fn plan<'f>(&mut self, vars: &[&str], parts: &[&'f Formula], mode: Mode) -> Plan<'f> {
        let needs: Vec<BTreeSet<String>> = parts
            .iter()
            .map(|p| {
                self.core
                    .free(p)
                    .iter()
                    .filter(|v| vars.contains(&v.as_str()))
                    .cloned()
                    .collect()
            })
            .collect();
        let mut order: Vec<String> = Vec::new();
        let mut determined = Vec::new();
        let relevant: Vec<&str> = vars
            .iter()
            .copied()
            .filter(|v| needs.iter().any(|n| n.contains(*v)))
            .collect();
        let determines = |v: &str, assigned: &[String]| -> Option<&'f WordEquation> {
            if mode == Mode::Forall {
                return None;
            }
            parts.iter().find_map(|p| match p {
                Formula::Eq(eq)
                    if eq.lhs == v
                        && eq.rhs.variables().iter().all(|x| {
                            *x != v
                                && (!vars.contains(x) || assigned.iter().any(|a| a == x))
                        }) =>
                {
                    Some(eq)
                }
                _ => None,
            })
        };
        while order.len() < relevant.len() {
            let mut best: Option<(bool, usize, &str)> = None;
            for v in &relevant {
                if order.iter().any(|o| o == v) {
                    continue;
                }
                let det = determines(v, &order).is_some();
                let completes = needs
                    .iter()
                    .filter(|n| {
                        n.contains(*v) && n.iter().all(|x| x == v || order.iter().any(|o| o == x))
                    })
                    .count();
                let better = match best {
                    None => true,
                    Some((bd, bc, _)) => (det, completes) > (bd, bc),
                };
                if better {
                    best = Some((det, completes, v));
                }
            }
            let (_, _, v) = best.unwrap();
            determined.push(determines(v, &order));
            order.push(v.to_string());
        }
        let mut checks: Vec<Vec<&'f Formula>> = vec![Vec::new(); order.len() + 1];
        for (p, n) in parts.iter().zip(&needs) {
            let level = n
                .iter()
                .map(|v| order.iter().position(|o| o == v).unwrap() + 1)
                .max()
                .unwrap_or(0);
            checks[level].push(p);
        }
        Plan {
            order,
            checks,
            determined,
        }
    }

    /// Returns whether the search stopped early (see [`Mode`]).
    fn search(
        &mut self,
        plan: &Plan<'_>,
        level: usize,
        env: &mut Env,
        mode: Mode,
        depth: usize,
        sink: &mut dyn FnMut(&Env),
    ) -> Result<bool, EvalError> {
        for p in &plan.checks[level] {
            let v = self.holds_in(p, env, depth)?;
            let dead = match mode {
                Mode::Exists | Mode::Collect => !v,
                Mode::Forall => v,
            };
            if dead {
                return Ok(false);
            }
        }
        if level == plan.order.len() {
            if mode == Mode::Collect {
                sink(env);
                return Ok(false);
            }
            return Ok(true);
        }
        let idx = self.core.idx;
        let candidates: Vec<FactorRef> = match plan.determined[level] {
            Some(eq) => pattern_value(idx, eq.rhs.items(), &|v| lookup(idx, env, v))?
                .into_iter()
                .collect(),
            None => idx.factors().to_vec(),
        };
        env.push(&plan.order[level], FactorRef::EMPTY);
        for c in candidates {
            env.set_top(c);
            match self.search(plan, level + 1, env, mode, depth, sink) {
                Ok(false) => {}
                other => {
                    env.pop();
                    return other;
                }
            }
        }
        env.pop();
        Ok(false)
    }
}

impl<'w> Evaluator<'w> for NaiveEngine<'w> {
    fn core(&mut self) -> &mut Core<'w> {
        &mut self.core
    }

    fn relation_under(
        &mut self,
        f: &Formula,
        fixed: &Env,
        depth: usize,
    ) -> Result<Relation, EvalError> {
        let free = self.core.free(f);
        let open: Vec<String> = free.iter().filter(|v| !fixed.contains(v)).cloned().collect();
        let open_refs: Vec<&str> = open.iter().map(String::as_str).collect();
        let parts = f.conjuncts();
        let plan = self.plan(&open_refs, &parts, Mode::Collect);
        let mut env = fixed.clone();
        let mut rows = Vec::new();
        let limit = self.core.config.max_rows;
        let mut overflow = false;
        self.search(&plan, 0, &mut env, Mode::Collect, depth, &mut |e| {
            if rows.len() <= limit {
                rows.push(open.iter().map(|v| e.get(v).unwrap()).collect());
            } else {
                overflow = true;
            }
        })?;
        if overflow {
            return Err(EvalError::RowLimit { limit });
        }
        let r = Relation::from_rows(&open, rows);
        self.core.record_rows(r.len())?;
        Ok(r)
    }
}

// ---------------------------------------------------------------------------
// bottom-up engine

/// The width-bounded evaluator: one table per subformula.
///
/// Every table built for a subformula ranges over that subformula's free
/// variables, so its size is at most `|Fac(w)|^k` where `k` is the width.
/// Conjunctions are flattened and joined greedily, smallest table first and
/// preferring tables that share a column with what has been joined so far.
/// Negated conjuncts and conjuncts whose variables are already covered act as
/// filters rather than being tabulated on their own.
pub struct BottomUpEngine<'w> {
    core: Core<'w>,
    tables: HashMap<usize, Rc<Relation>>,
    regex_tables: HashMap<Regex, Rc<Vec<FactorRef>>>,
}

impl<'w> BottomUpEngine<'w> {
    pub fn new(idx: &'w FactorIndex, config: EvalConfig) -> Self {
        Self {
            core: Core::new(idx, config),
            tables: HashMap::new(),
            regex_tables: HashMap::new(),
        }
    }

    pub fn stats(&self) -> &EvalStats {
        &self.core.stats
    }

    pub fn set_relation(&mut self, name: &str, arity: usize, tuples: TupleSet) {
        self.core.bind_relation(name, arity, Rc::new(tuples));
        self.tables.clear();
    }

    pub fn relation(&mut self, f: &Formula) -> Result<Relation, EvalError> {
        self.relation_with(f, &Bindings::new())
    }

    pub fn relation_with(&mut self, f: &Formula, fixed: &Bindings) -> Result<Relation, EvalError> {
        self.core.reset();
        self.tables.clear();
        self.relation_under(f, &Env::from_bindings(fixed), 0)
    }

    /// Whether `(w, σ) ⊨ f`, where every free variable of `f` must be bound.
    pub fn holds(&mut self, f: &Formula, bindings: &Bindings) -> Result<bool, EvalError> {
        for v in free_vars(f) {
            if !bindings.contains_key(&v) {
                return Err(EvalError::UnboundVariable(v));
            }
        }
        Ok(!self.relation_with(f, bindings)?.is_empty())
    }

    fn open_vars(&mut self, f: &Formula, fixed: &Env) -> Vec<String> {
        self.core
            .free(f)
            .iter()
            .filter(|v| !fixed.contains(v))
            .cloned()
            .collect()
    }

    fn regex_table(&mut self, r: &Regex) -> Rc<Vec<FactorRef>> {
        if let Some(t) = self.regex_tables.get(r) {
            return t.clone();
        }
        let idx = self.core.idx;
        let m = r.compile();
        let s = idx.word().symbols();
        let mut out = BTreeSet::new();
        for i in 0..=s.len() {
            for (l, ok) in m.accepting_prefixes(&s[i..]).into_iter().enumerate() {
                if ok {
                    out.insert(idx.canonicalize(FactorRef::new(i + 1, l)));
                }
            }
        }
        let t: Rc<Vec<FactorRef>> = Rc::new(out.into_iter().collect());
        self.regex_tables.insert(r.clone(), t.clone());
        t
    }

    fn table(&mut self, f: &Formula, fixed: &Env, depth: usize) -> Result<Relation, EvalError> {
        self.core.check_depth(depth)?;
        let free = self.core.free(f);
        let cacheable =
            !free.iter().any(|v| fixed.contains(v)) && !self.core.uses_outer_relations(f);
        let key = f as *const Formula as usize;
        if cacheable {
            if let Some(t) = self.tables.get(&key) {
                return Ok((**t).clone());
            }
        }
        let r = self.compute(f, fixed, depth)?;
        self.core.record_rows(r.len())?;
        if cacheable {
            self.tables.insert(key, Rc::new(r.clone()));
        }
        Ok(r)
    }

    fn compute(&mut self, f: &Formula, fixed: &Env, depth: usize) -> Result<Relation, EvalError> {
        let idx = self.core.idx;
        match f {
            Formula::Eq(eq) => solve_equation_in(idx, eq, fixed),
            Formula::Constraint { var, regex } => {
                if is_universe(var) || fixed.contains(var) {
                    let v = lookup(idx, fixed, var)?;
                    let m = self.core.matcher(f, regex);
                    Ok(Relation::unit(m.matches(idx.word().slice(v))))
                } else {
                    let t = self.regex_table(regex);
                    Ok(Relation::from_rows(
                        &[var.as_str()],
                        t.iter().map(|&x| vec![x]).collect(),
                    ))
                }
            }
            Formula::Rel { name, args } => {
                let (arity, tuples) = self.core.relation(name)?;
                if arity != args.len() {
                    return Err(EvalError::ArityMismatch {
                        name: name.clone(),
                        expected: arity,
                        found: args.len(),
                    });
                }
                Ok(bind_tuples(idx, tuples.iter(), args, fixed))
            }
            Formula::And(..) => self.conjunction(f, fixed, depth),
            Formula::Or(..) => {
                let scheme = self.open_vars(f, fixed);
                let mut acc = Relation::empty(&scheme);
                for d in f.disjuncts() {
                    let r = self.table(d, fixed, depth + 1)?;
                    if r.arity() < scheme.len() {
                        self.core.guard_power(scheme.len())?;
                    }
                    acc = acc.union(&r.pad(&scheme, idx.factors()));
                    self.core.record_rows(acc.len())?;
                }
                Ok(acc)
            }
            Formula::Not(a) => {
                let r = self.table(a, fixed, depth + 1)?;
                self.core.guard_power(r.arity())?;
                Ok(r.complement(idx.factors()))
            }
            Formula::Exists(v, a) => {
                let r = self.table(a, &fixed.without(v), depth + 1)?;
                Ok(r.project_away(v))
            }
            Formula::Forall(v, a) => {
                let r = self.table(a, &fixed.without(v), depth + 1)?;
                Ok(r.divide(v, idx.factor_count()))
            }
            Formula::Closure { .. } | Formula::Fixpoint { .. } => {
                fixpoint::node_relation(self, f, fixed, depth + 1)
            }
        }
    }

    fn conjunction(&mut self, f: &Formula, fixed: &Env, depth: usize) -> Result<Relation, EvalError> {
        let idx = self.core.idx;
        let scheme = self.open_vars(f, fixed);
        let parts = f.conjuncts();
        let vars: Vec<BTreeSet<String>> = parts
            .iter()
            .map(|p| self.open_vars(p, fixed).into_iter().collect())
            .collect();
        let mut pending: Vec<usize> = (0..parts.len()).collect();
        let mut tables: HashMap<usize, Relation> = HashMap::new();
        let mut acc = Relation::unit(true);
        let covered = |acc: &Relation, i: usize| vars[i].iter().all(|v| acc.column(v).is_some());

        loop {
            if acc.is_empty() {
                return Ok(Relation::empty(&scheme));
            }
            // filters: parts whose variables are all covered
            if let Some(pos) = pending.iter().position(|&i| covered(&acc, i)) {
                let i = pending.remove(pos);
                acc = self.filter(parts[i], &acc, fixed, depth)?;
                self.core.record_rows(acc.len())?;
                continue;
            }
            if pending.is_empty() {
                break;
            }
            // equations whose right side is known extend every row by one value
            if let Some(pos) = pending.iter().position(|&i| match parts[i] {
                Formula::Eq(eq) => {
                    !is_universe(&eq.lhs)
                        && !fixed.contains(&eq.lhs)
                        && acc.column(&eq.lhs).is_none()
                        && eq.rhs.variables().iter().all(|v| {
                            is_universe(v) || fixed.contains(v) || acc.column(v).is_some()
                        })
                }
                _ => false,
            }) {
                let i = pending.remove(pos);
                let Formula::Eq(eq) = parts[i] else { unreachable!() };
                acc = extend_by_equation(idx, eq, &acc, fixed)?;
                self.core.record_rows(acc.len())?;
                continue;
            }
            // otherwise join the best generator
            let generators: Vec<usize> = pending
                .iter()
                .copied()
                .filter(|&i| !matches!(parts[i], Formula::Not(_)))
                .collect();
            let deferrable = |i: usize| match parts[i] {
                Formula::Eq(eq) => {
                    !is_universe(&eq.lhs)
                        && !fixed.contains(&eq.lhs)
                        && eq.rhs.variables().iter().all(|v| {
                            *v != eq.lhs
                                && (is_universe(v)
                                    || fixed.contains(v)
                                    || acc.column(v).is_some()
                                    || generators
                                        .iter()
                                        .any(|&j| j != i && vars[j].contains(*v)))
                        })
                }
                _ => false,
            };
            let mut candidates: Vec<usize> =
                generators.iter().copied().filter(|&i| !deferrable(i)).collect();
            if candidates.is_empty() {
                candidates = generators.clone();
            }
            if candidates.is_empty() {
                candidates = pending.clone();
            }
            for &i in &candidates {
                if !tables.contains_key(&i) {
                    let t = self.table(parts[i], fixed, depth + 1)?;
                    tables.insert(i, t);
                }
            }
            let connected = |i: usize| vars[i].iter().any(|v| acc.column(v).is_some());
            let best = candidates
                .iter()
                .copied()
                .min_by_key(|&i| (!connected(i), tables[&i].len(), i))
                .unwrap();
            pending.retain(|&i| i != best);
            let t = tables.remove(&best).unwrap();
            acc = acc.join(&t);
            self.core.record_rows(acc.len())?;
        }
        Ok(acc)
    }

    /// Keeps the rows of `acc` that satisfy `p`, whose variables are covered.
    fn filter(
        &mut self,
        p: &Formula,
        acc: &Relation,
        fixed: &Env,
        depth: usize,
    ) -> Result<Relation, EvalError> {
        let idx = self.core.idx;
        let scheme = acc.scheme().to_vec();
        let row_lookup = |row: &[FactorRef], v: &str| -> Result<FactorRef, EvalError> {
            if is_universe(v) {
                return Ok(idx.whole());
            }
            if let Ok(c) = scheme.binary_search_by(|s| s.as_str().cmp(v)) {
                return Ok(row[c]);
            }
            fixed
                .get(v)
                .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))
        };
        match p {
            Formula::Eq(eq) => {
                let mut rows = Vec::new();
                for r in acc.rows() {
                    let target = row_lookup(r, &eq.lhs)?;
                    if pattern_matches(idx, target, eq.rhs.items(), &|v| row_lookup(r, v))? {
                        rows.push(r.clone());
                    }
                }
                Ok(Relation::from_rows(&scheme, rows))
            }
            Formula::Constraint { var, regex } => {
                let m = self.core.matcher(p, regex);
                let mut rows = Vec::new();
                for r in acc.rows() {
                    if m.matches(idx.word().slice(row_lookup(r, var)?)) {
                        rows.push(r.clone());
                    }
                }
                Ok(Relation::from_rows(&scheme, rows))
            }
            Formula::Not(g) => {
                let t = self.table(g, fixed, depth + 1)?;
                Ok(acc.semijoin(&t, false))
            }
            _ => {
                let t = self.table(p, fixed, depth + 1)?;
                Ok(acc.semijoin(&t, true))
            }
        }
    }
}

/// Adds a column for the left side of `eq`, whose right side is known in
/// every row of `acc`; rows where the right side is not a factor are dropped.
fn extend_by_equation(
    idx: &FactorIndex,
    eq: &WordEquation,
    acc: &Relation,
    fixed: &Env,
) -> Result<Relation, EvalError> {
    let scheme = acc.scheme().to_vec();
    let mut out_scheme = scheme.clone();
    out_scheme.push(eq.lhs.clone());
    let mut rows = Vec::new();
    for r in acc.rows() {
        let get = |v: &str| -> Result<FactorRef, EvalError> {
            if is_universe(v) {
                return Ok(idx.whole());
            }
            if let Ok(c) = scheme.binary_search_by(|s| s.as_str().cmp(v)) {
                return Ok(r[c]);
            }
            fixed
                .get(v)
                .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))
        };
        if let Some(val) = pattern_value(idx, eq.rhs.items(), &get)? {
            let mut row = r.clone();
            row.push(val);
            rows.push(row);
        }
    }
    Ok(Relation::from_rows(&out_scheme, rows))
}

impl<'w> Evaluator<'w> for BottomUpEngine<'w> {
    fn core(&mut self) -> &mut Core<'w> {
        &mut self.core
    }

    fn relation_under(
        &mut self,
        f: &Formula,
        fixed: &Env,
        depth: usize,
    ) -> Result<Relation, EvalError> {
        self.table(f, fixed, depth)
    }
}

// ---------------------------------------------------------------------------
// entry points

/// Model checking with the reference semantics. A binding whose value is not
/// a factor of the host word makes the result `false`, with a warning.
pub fn eval_naive(f: &Formula, sigma: &Substitution) -> Result<Verdict, EvalError> {
    check(f, sigma, Engine::Naive, EvalConfig::default())
}

/// Model checking with either engine.
pub fn check(
    f: &Formula,
    sigma: &Substitution,
    engine: Engine,
    config: EvalConfig,
) -> Result<Verdict, EvalError> {
    let idx = FactorIndex::new(sigma.host.clone());
    let (bindings, bad) = sigma.resolve(&idx);
    for v in free_vars(f) {
        if !sigma.bindings.contains_key(&v) {
            return Err(EvalError::UnboundVariable(v));
        }
    }
    if !bad.is_empty() {
        let warnings = bad
            .into_iter()
            .map(|v| {
                format!(
                    "value {:?} of `{}` is not a factor of the word",
                    sigma.bindings[&v].to_string(),
                    v
                )
            })
            .collect();
        return Ok(Verdict {
            holds: false,
            warnings,
        });
    }
    let holds = match engine {
        Engine::Naive => NaiveEngine::new(&idx, config).holds(f, &bindings)?,
        Engine::BottomUp => BottomUpEngine::new(&idx, config).holds(f, &bindings)?,
    };
    Ok(Verdict {
        holds,
        warnings: Vec::new(),
    })
}

/// `⟦f⟧(w)` computed by the reference evaluator.
pub fn eval_relation_naive(f: &Formula, w: &Word) -> Result<Relation, EvalError> {
    let idx = FactorIndex::new(w.clone());
    NaiveEngine::new(&idx, EvalConfig::default()).relation(f)
}

/// `⟦f⟧(w)` computed by the width-bounded engine.
pub fn eval_bottomup(f: &Formula, w: &Word) -> Result<Relation, EvalError> {
    let idx = FactorIndex::new(w.clone());
    BottomUpEngine::new(&idx, EvalConfig::default()).relation(f)
}

/// `⟦f⟧(w)` with the chosen engine, together with the evaluation counters.
pub fn eval_relation(
    f: &Formula,
    idx: &FactorIndex,
    engine: Engine,
    config: EvalConfig,
) -> Result<(Relation, EvalStats), EvalError> {
    match engine {
        Engine::Naive => {
            let mut e = NaiveEngine::new(idx, config);
            let r = e.relation(f)?;
            Ok((r, e.stats().clone()))
        }
        Engine::BottomUp => {
            let mut e = BottomUpEngine::new(idx, config);
            let r = e.relation(f)?;
            Ok((r, e.stats().clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn rel_strings(f: &str, w: &str, engine: Engine) -> BTreeSet<Vec<String>> {
        let f = parse(f).unwrap();
        let idx = FactorIndex::new(Word::new(w));
        let (r, _) = eval_relation(&f, &idx, engine, EvalConfig::default()).unwrap();
        r.value_rows(&idx).into_iter().collect()
    }

    fn both(f: &str, w: &str) -> BTreeSet<Vec<String>> {
        let a = rel_strings(f, w, Engine::Naive);
        let b = rel_strings(f, w, Engine::BottomUp);
        assert_eq!(a, b, "engines disagree on {f} over {w}");
        a
    }

    fn set(rows: &[&[&str]]) -> BTreeSet<Vec<String>> {
        rows.iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn squares_of_a_word() {
        let r = both("x = y y & y = y", "abab");
        assert_eq!(r, set(&[&["", ""], &["abab", "ab"]]));
        let r = both("exists z: (x = z z)", "abab");
        assert_eq!(r, set(&[&[""], &["abab"]]));
    }

    #[test]
    fn equation_solutions() {
        let idx = FactorIndex::new(Word::new("aab"));
        let eq = WordEquation::new("u", crate::syntax::Pattern::vars(&["x", "y"]));
        let r = solve_equation_in(&idx, &eq, &Env::new()).unwrap();
        let rows: BTreeSet<Vec<String>> = r.value_rows(&idx).into_iter().collect();
        assert_eq!(rows, set(&[&["", "aab"], &["a", "ab"], &["aa", "b"], &["aab", ""]]));
    }

    #[test]
    fn negation_and_universal() {
        let r = both("!x = \"a\"", "ab");
        assert_eq!(r, set(&[&[""], &["b"], &["ab"]]));
        let r = both("forall y: (exists z: x = y z | !y = y)", "ab");
        assert_eq!(r, BTreeSet::new());
        let r = both("forall y: (exists p, s: y = p x s)", "ab");
        assert_eq!(r, set(&[&[""]]));
    }

    #[test]
    fn unbound_and_non_factor() {
        let f = parse("x = y").unwrap();
        let s = Substitution::new(Word::new("ab")).bind("x", "a");
        assert_eq!(eval_naive(&f, &s), Err(EvalError::UnboundVariable("y".into())));
        let s = Substitution::new(Word::new("ab")).bind("x", "c").bind("y", "c");
        let v = eval_naive(&f, &s).unwrap();
        assert!(!v.holds);
        assert_eq!(v.warnings.len(), 2);
    }

    #[test]
    fn row_limit_is_reported() {
        let f = parse("!x = y").unwrap();
        let idx = FactorIndex::new(Word::new("abcdefgh"));
        let config = EvalConfig {
            max_rows: 100,
            ..EvalConfig::default()
        };
        assert!(matches!(
            eval_relation(&f, &idx, Engine::BottomUp, config),
            Err(EvalError::RowLimit { .. })
        ));
    }
}
