//! FC-Datalog: rules whose bodies are word equations and relation atoms,
//! evaluated to a fixed point on one host word.
//!
//! Program text holds rules of the form
//!
//! ```text
//! # comment
//! Ans() <- u = x y z, E(x, y, z).
//! E(x, y, z) <- x = "", y = "", z = "".
//! ```
//!
//! Relation symbols are declared by use; `Ans` is the output relation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::eval::{BottomUpEngine, EvalConfig, EvalError};
use crate::relation::{Relation, TupleSet};
use crate::syntax::{
    free_vars, is_universe, parse_atom, print, tokenize, Cursor, FixKind, Formula, FreshNames,
    Pattern, SyntaxError, Tok,
};
use crate::word::{FactorIndex, FactorRef, Word};

/// Name of the output relation.
pub const ANSWER: &str = "Ans";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatalogError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{col}: relation `{name}` is used with {found} arguments but has arity {expected}")]
    ArityMismatch {
        line: usize,
        col: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{line}:{col}: head variable `{var}` does not occur in the rule body")]
    UnsafeHead {
        line: usize,
        col: usize,
        var: String,
    },
    #[error("{line}:{col}: negated atoms are not allowed in rule bodies")]
    Negation { line: usize, col: usize },
    #[error("{line}:{col}: regular constraints in rule bodies are not enabled")]
    ConstraintsDisabled { line: usize, col: usize },
    #[error("{line}:{col}: only word equations, constraints, and relation atoms may occur in rule bodies")]
    UnsupportedAtom { line: usize, col: usize },
    #[error("relation `{0}` is used but no rule defines it")]
    UnknownRelation(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `head(args) <- body₁, …, bodyₘ.`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: String,
    pub args: Vec<String>,
    pub body: Vec<Formula>,
}

impl Rule {
    /// Variables of the rule other than `u`.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.args.iter().filter(|a| !is_universe(a)).cloned().collect();
        for a in &self.body {
            out.extend(free_vars(a));
        }
        out
    }

    /// `∃(body-only variables): ⋀ body`, whose free variables are the head's.
    fn body_formula(&self) -> Formula {
        let head: BTreeSet<&String> = self.args.iter().collect();
        let hidden: Vec<String> = self
            .variables()
            .into_iter()
            .filter(|v| !head.contains(v))
            .collect();
        Formula::exists_all(&hidden, Formula::and_all(self.body.iter().cloned()))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(print).collect();
        write!(f, "{}({}) <- {}.", self.head, self.args.join(", "), body.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatalogProgram {
    pub rules: Vec<Rule>,
    pub arities: BTreeMap<String, usize>,
}

impl DatalogProgram {
    pub fn answer_arity(&self) -> usize {
        self.arities.get(ANSWER).copied().unwrap_or(0)
    }

    pub fn uses_constraints(&self) -> bool {
        self.rules
            .iter()
            .flat_map(|r| &r.body)
            .any(|a| matches!(a, Formula::Constraint { .. }))
    }
}

impl fmt::Display for DatalogProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Parses a program whose bodies hold word equations and relation atoms.
pub fn parse_program(text: &str) -> Result<DatalogProgram, DatalogError> {
    parse_program_with(text, false)
}

/// Parses a program, optionally accepting regular constraints in bodies.
pub fn parse_program_with(text: &str, allow_constraints: bool) -> Result<DatalogProgram, DatalogError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut rules = Vec::new();
    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    let mut uses: Vec<(String, usize, usize)> = Vec::new();
    let mut note = |name: &str, n: usize, line: usize, col: usize| -> Result<(), DatalogError> {
        match arities.get(name) {
            Some(&a) if a != n => Err(DatalogError::ArityMismatch {
                line,
                col,
                name: name.to_string(),
                expected: a,
                found: n,
            }),
            _ => {
                arities.insert(name.to_string(), n);
                Ok(())
            }
        }
    };
    while !cur.at_eof() {
        let (head, ht) = cur.expect_ident()?;
        cur.expect_sym('(')?;
        let mut args = Vec::new();
        if !cur.at_sym(')') {
            loop {
                args.push(cur.expect_ident()?.0);
                if !cur.eat_sym(',') {
                    break;
                }
            }
        }
        cur.expect_sym(')')?;
        note(&head, args.len(), ht.line, ht.col)?;
        if cur.peek().tok != Tok::Arrow {
            return Err(cur.unexpected("`<-`").into());
        }
        cur.next();
        let mut body = Vec::new();
        loop {
            let t = cur.peek().clone();
            if cur.at_sym('!') {
                return Err(DatalogError::Negation {
                    line: t.line,
                    col: t.col,
                });
            }
            let atom = parse_atom(&mut cur)?;
            match &atom {
                Formula::Eq(_) => {}
                Formula::Constraint { .. } if allow_constraints => {}
                Formula::Constraint { .. } => {
                    return Err(DatalogError::ConstraintsDisabled {
                        line: t.line,
                        col: t.col,
                    })
                }
                Formula::Rel { name, args } => {
                    note(name, args.len(), t.line, t.col)?;
                    uses.push((name.clone(), t.line, t.col));
                }
                _ => {
                    return Err(DatalogError::UnsupportedAtom {
                        line: t.line,
                        col: t.col,
                    })
                }
            }
            body.push(atom);
            if !cur.eat_sym(',') {
                break;
            }
        }
        cur.expect_sym('.')?;
        let rule = Rule { head, args, body };
        let mut in_body = BTreeSet::new();
        for a in &rule.body {
            in_body.extend(free_vars(a));
        }
        if let Some(v) = rule
            .args
            .iter()
            .find(|a| !is_universe(a) && !in_body.contains(*a))
        {
            return Err(DatalogError::UnsafeHead {
                line: ht.line,
                col: ht.col,
                var: v.clone(),
            });
        }
        rules.push(rule);
    }
    let heads: BTreeSet<&String> = rules.iter().map(|r| &r.head).collect();
    if let Some((name, _, _)) = uses.iter().find(|(n, _, _)| !heads.contains(n)) {
        return Err(DatalogError::UnknownRelation(name.clone()));
    }
    arities.entry(ANSWER.to_string()).or_insert(0);
    Ok(DatalogProgram { rules, arities })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every round re-evaluates every rule against all facts.
    Naive,
    /// After the first round, each rule is evaluated once per relation atom,
    /// with that atom restricted to the facts new in the previous round.
    SemiNaive,
}

/// Final relations of a program on one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatalogResult {
    pub relations: BTreeMap<String, TupleSet>,
    /// Rounds until no relation changed (the last round adds nothing).
    pub rounds: usize,
}

impl DatalogResult {
    pub fn answer(&self) -> &TupleSet {
        &self.relations[ANSWER]
    }
}

fn head_tuples(idx: &FactorIndex, rel: &Relation, args: &[String]) -> Vec<Vec<FactorRef>> {
    let cols: Vec<Option<usize>> = args
        .iter()
        .map(|a| if is_universe(a) { None } else { rel.column(a) })
        .collect();
    rel.rows()
        .iter()
        .map(|r| {
            cols.iter()
                .map(|c| c.map_or(idx.whole(), |c| r[c]))
                .collect()
        })
        .collect()
}

fn delta_name(name: &str) -> String {
    format!("Δ{name}")
}

/// Evaluates a program to its least fixed point.
pub fn eval_program_in(
    p: &DatalogProgram,
    idx: &FactorIndex,
    strategy: Strategy,
    config: EvalConfig,
) -> Result<DatalogResult, DatalogError> {
    let mut rels: BTreeMap<String, TupleSet> =
        p.arities.keys().map(|k| (k.clone(), TupleSet::new())).collect();
    let mut engine = BottomUpEngine::new(idx, config);
    let bodies: Vec<Formula> = p.rules.iter().map(Rule::body_formula).collect();
    let mut rounds = 0usize;
    let mut delta: BTreeMap<String, TupleSet> = BTreeMap::new();
    loop {
        rounds += 1;
        if rounds > config.max_stages {
            return Err(EvalError::StageLimit(config.max_stages).into());
        }
        for (name, t) in &rels {
            engine.set_relation(name, p.arities[name], t.clone());
        }
        let mut new: BTreeMap<String, TupleSet> = BTreeMap::new();
        let mut derive = |engine: &mut BottomUpEngine<'_>, rule: &Rule, f: &Formula| -> Result<(), DatalogError> {
            let r = engine.relation(f)?;
            new.entry(rule.head.clone())
                .or_default()
                .extend(head_tuples(idx, &r, &rule.args));
            Ok(())
        };
        if strategy == Strategy::Naive || rounds == 1 {
            for (rule, f) in p.rules.iter().zip(&bodies) {
                derive(&mut engine, rule, f)?;
            }
        } else {
            for (name, t) in &delta {
                engine.set_relation(&delta_name(name), p.arities[name], t.clone());
            }
            for rule in &p.rules {
                for (i, atom) in rule.body.iter().enumerate() {
                    let Formula::Rel { name, args } = atom else { continue };
                    if delta.get(name).map_or(true, BTreeSet::is_empty) {
                        continue;
                    }
                    let mut variant = rule.clone();
                    variant.body[i] = Formula::rel(&delta_name(name), args);
                    derive(&mut engine, rule, &variant.body_formula())?;
                }
            }
        }
        let mut changed = false;
        delta.clear();
        for (name, facts) in new {
            let cur = rels.get_mut(&name).expect("declared relation");
            let fresh: TupleSet = facts.difference(cur).cloned().collect();
            if !fresh.is_empty() {
                changed = true;
                cur.extend(fresh.iter().cloned());
                delta.insert(name, fresh);
            }
        }
        if !changed {
            return Ok(DatalogResult {
                relations: rels,
                rounds,
            });
        }
    }
}

/// `⟦P⟧(w)`: the final content of `Ans`.
pub fn eval_program(p: &DatalogProgram, w: &Word) -> Result<TupleSet, DatalogError> {
    let idx = FactorIndex::new(w.clone());
    Ok(eval_program_in(p, &idx, Strategy::Naive, EvalConfig::default())?
        .answer()
        .clone())
}

/// Whether `w` is in the language of a program with a nullary answer.
pub fn accepts(p: &DatalogProgram, w: &Word) -> Result<bool, DatalogError> {
    Ok(!eval_program(p, w)?.is_empty())
}

/// Rewrites a program into one least-fixpoint formula defining `Ans`.
///
/// Each relation `R` becomes `[lfp v⃗, R : ⋁_rules ∃ȳ: (body ∧ v⃗ = head)](…)`,
/// and a relation atom for a symbol not bound by an enclosing operator is
/// replaced by that symbol's own operator, nested inside. Nesting (rather than
/// one operator over a tagged union of all relations) keeps the construction
/// sound on words with fewer distinct factors than there are relations.
///
/// Returns the formula and its free variables, which stand for the columns of
/// `Ans` in order.
pub fn to_lfp(p: &DatalogProgram) -> (Formula, Vec<String>) {
    let mut used: BTreeSet<String> = BTreeSet::new();
    for r in &p.rules {
        used.extend(r.variables());
        used.extend(r.args.iter().cloned());
    }
    let mut fresh = FreshNames::new(used);
    let binders: BTreeMap<String, Vec<String>> = p
        .arities
        .iter()
        .map(|(name, &k)| (name.clone(), (1..=k).map(|_| fresh.fresh("v")).collect()))
        .collect();
    let answer_args = (1..=p.answer_arity()).map(|_| fresh.fresh("a")).collect::<Vec<_>>();
    let f = define(p, &binders, ANSWER, &answer_args, &mut Vec::new());
    (f, answer_args)
}

fn define(
    p: &DatalogProgram,
    binders: &BTreeMap<String, Vec<String>>,
    name: &str,
    args: &[String],
    bound: &mut Vec<String>,
) -> Formula {
    let vars = &binders[name];
    bound.push(name.to_string());
    let mut disjuncts = Vec::new();
    for rule in p.rules.iter().filter(|r| r.head == name) {
        let mut parts: Vec<Formula> = rule
            .body
            .iter()
            .map(|a| match a {
                Formula::Rel { name: s, args } if !bound.contains(s) => {
                    define(p, binders, s, args, bound)
                }
                other => other.clone(),
            })
            .collect();
        for (v, h) in vars.iter().zip(&rule.args) {
            parts.push(Formula::eq(v, Pattern::var(h)));
        }
        let hidden: Vec<String> = rule.variables().into_iter().collect();
        disjuncts.push(Formula::exists_all(&hidden, Formula::and_all(parts)));
    }
    bound.pop();
    let body = if disjuncts.is_empty() {
        Formula::falsum()
    } else {
        Formula::or_all(disjuncts)
    };
    Formula::Fixpoint {
        kind: FixKind::Lfp,
        vars: vars.clone(),
        rel: name.to_string(),
        body: Box::new(body),
        args: args.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABC: &str = "Ans() <- u = x y z, E(x, y, z).\n\
                       E(x, y, z) <- x = \"\", y = \"\", z = \"\".\n\
                       E(x, y, z) <- x = xh \"a\", y = yh \"b\", z = zh \"c\", E(xh, yh, zh).\n";

    #[test]
    fn parses_and_evaluates_abc() {
        let p = parse_program(ABC).unwrap();
        assert_eq!(p.rules.len(), 3);
        assert_eq!(p.arities, BTreeMap::from([("Ans".into(), 0), ("E".into(), 3)]));
        assert!(accepts(&p, &Word::new("aabbcc")).unwrap());
        assert!(!accepts(&p, &Word::new("aabbc")).unwrap());
        assert!(accepts(&p, &Word::new("")).unwrap());
    }

    #[test]
    fn strategies_agree() {
        let p = parse_program(ABC).unwrap();
        for w in ["abc", "aabbcc", "abcabc", "aaabbbccc"] {
            let idx = FactorIndex::new(Word::new(w));
            let a = eval_program_in(&p, &idx, Strategy::Naive, EvalConfig::default()).unwrap();
            let b = eval_program_in(&p, &idx, Strategy::SemiNaive, EvalConfig::default()).unwrap();
            assert_eq!(a.relations, b.relations, "{w}");
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_program("Ans(x) <- u = y."),
            Err(DatalogError::UnsafeHead { .. })
        ));
        assert!(matches!(
            parse_program("R(x) <- x = \"a\".\nR(x, y) <- x = y."),
            Err(DatalogError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_program("Ans() <- !u = \"a\"."),
            Err(DatalogError::Negation { .. })
        ));
        assert!(matches!(
            parse_program("Ans() <- E(u)."),
            Err(DatalogError::UnknownRelation(_))
        ));
        assert!(matches!(
            parse_program("Ans() <- u in /a*/."),
            Err(DatalogError::ConstraintsDisabled { .. })
        ));
        assert!(parse_program_with("Ans() <- u in /a*/.", true).is_ok());
    }

    #[test]
    fn program_without_answer_rules_is_empty() {
        let p = parse_program("R(x) <- x = \"a\".").unwrap();
        assert!(eval_program(&p, &Word::new("a")).unwrap().is_empty());
    }

    #[test]
    fn lfp_translation_matches_evaluation() {
        use crate::eval::{eval_relation, Engine};
        let p = parse_program(ABC).unwrap();
        let (f, args) = to_lfp(&p);
        assert!(args.is_empty());
        assert!(free_vars(&f).is_empty());
        for w in ["", "abc", "aabbcc", "aabc", "acb"] {
            let idx = FactorIndex::new(Word::new(w));
            let (r, _) = eval_relation(&f, &idx, Engine::BottomUp, EvalConfig::default()).unwrap();
            assert_eq!(!r.is_empty(), accepts(&p, &Word::new(w)).unwrap(), "{w}");
        }
    }
}
