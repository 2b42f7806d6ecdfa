//! Transitive closure and fixpoint operators.
//!
//! Parameters (free variables of an operator's body other than its binders)
//! are held at their outer values while the operator is computed, and results
//! are cached per node, parameter values, and relation environment.
//!
//! - `[tc x⃗, y⃗ : φ](s⃗, t⃗)` holds when `t⃗` is reachable from `s⃗` in zero or
//!   more steps of the edge relation `{(x⃗, y⃗) | φ}`.
//! - `dtc` only follows edges out of tuples that have exactly one successor.
//! - `[lfp x⃗, R : φ](t⃗)` iterates `R ↦ {x⃗ | φ}` from the empty relation up to
//!   its least fixed point and tests `t⃗` for membership.
//! - `pfp` iterates the same way without requiring monotonicity; if the
//!   stages never repeat a relation twice in a row, the result is empty.
//!
//! Binders that do not occur free in the body range over all factors.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use crate::eval::{
    bind_tuples, BottomUpEngine, Engine, Env, EvalConfig, EvalError, Evaluator, NaiveEngine,
};
use crate::relation::{Relation, TupleSet};
use crate::syntax::{ClosureKind, FixKind, Formula};
use crate::word::{FactorIndex, FactorRef};

/// The edge relation of a closure operator.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    succ: HashMap<Vec<FactorRef>, Vec<Vec<FactorRef>>>,
}

impl Graph {
    pub fn from_edges(edges: impl IntoIterator<Item = (Vec<FactorRef>, Vec<FactorRef>)>) -> Self {
        let mut sets: HashMap<Vec<FactorRef>, BTreeSet<Vec<FactorRef>>> = HashMap::new();
        for (a, b) in edges {
            sets.entry(a).or_default().insert(b);
        }
        Self {
            succ: sets
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        }
    }

    pub fn successors(&self, v: &[FactorRef]) -> &[Vec<FactorRef>] {
        self.succ.get(v).map_or(&[], Vec::as_slice)
    }

    pub fn edge_count(&self) -> usize {
        self.succ.values().map(Vec::len).sum()
    }

    /// Tuples reachable from `from` in zero or more steps. With
    /// `deterministic`, a step may only leave a tuple with a single successor.
    pub fn reach(&self, from: &[FactorRef], deterministic: bool) -> BTreeSet<Vec<FactorRef>> {
        let mut seen: BTreeSet<Vec<FactorRef>> = BTreeSet::new();
        seen.insert(from.to_vec());
        if deterministic {
            let mut cur = from.to_vec();
            loop {
                match self.successors(&cur) {
                    [next] if !seen.contains(next) => {
                        seen.insert(next.clone());
                        cur = next.clone();
                    }
                    _ => break,
                }
            }
            return seen;
        }
        let mut queue = vec![from.to_vec()];
        while let Some(v) = queue.pop() {
            for n in self.successors(&v) {
                if seen.insert(n.clone()) {
                    queue.push(n.clone());
                }
            }
        }
        seen
    }
}

/// Stages of a fixpoint iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iteration {
    /// `R_0 = ∅, R_1, …` up to the first repetition, when recorded.
    pub stages: Vec<TupleSet>,
    /// Number of applications of the step operator.
    pub steps: usize,
    /// The fixed point, or `∅` for a partial fixpoint that does not exist.
    pub result: TupleSet,
    /// Whether the iteration reached a fixed point.
    pub converged: bool,
}

fn ptr(f: &Formula) -> usize {
    f as *const Formula as usize
}

/// All tuples over `vars` of the rows of `rel`, with variables missing from
/// the scheme ranging over every factor.
fn tuples_over<'w, E: Evaluator<'w>>(
    e: &mut E,
    rel: &Relation,
    vars: &[String],
) -> Result<Vec<Vec<FactorRef>>, EvalError> {
    let idx = e.core().idx;
    let missing = vars.iter().filter(|v| rel.column(v).is_none()).count();
    if missing > 0 {
        e.core().guard_power(missing + rel.arity())?;
    }
    let padded = rel.pad(vars, idx.factors());
    let cols: Vec<usize> = vars.iter().map(|v| padded.column(v).unwrap()).collect();
    Ok(padded
        .rows()
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect())
}

/// One application of the step operator: `{x⃗ | φ}` with `rel` interpreted as
/// `current` and the parameters of `body` held at their values in `outer`.
pub fn step_operator<'w, E: Evaluator<'w>>(
    e: &mut E,
    body: &Formula,
    vars: &[String],
    rel: &str,
    current: Rc<TupleSet>,
    outer: &Env,
    depth: usize,
) -> Result<TupleSet, EvalError> {
    let prev = e.core().bind_relation(rel, vars.len(), current);
    let r = e.relation_under(body, outer, depth);
    e.core().restore_relation(rel, prev);
    let r = r?;
    e.core().stats.stages += 1;
    Ok(tuples_over(e, &r, vars)?.into_iter().collect())
}

/// Iterates the step operator from the empty relation.
pub fn iterate<'w, E: Evaluator<'w>>(
    e: &mut E,
    kind: FixKind,
    vars: &[String],
    rel: &str,
    body: &Formula,
    outer: &Env,
    record: bool,
    depth: usize,
) -> Result<Iteration, EvalError> {
    let max = e.core().config.max_stages;
    let mut cur: Rc<TupleSet> = Rc::new(TupleSet::new());
    let mut stages = Vec::new();
    let mut seen: HashSet<Rc<TupleSet>> = HashSet::new();
    let mut steps = 0usize;
    loop {
        if record {
            stages.push((*cur).clone());
        }
        if kind == FixKind::Pfp {
            seen.insert(cur.clone());
        }
        if steps >= max {
            return Err(EvalError::StageLimit(max));
        }
        let next = step_operator(e, body, vars, rel, cur.clone(), outer, depth)?;
        steps += 1;
        if next == *cur {
            return Ok(Iteration {
                stages,
                steps,
                result: next,
                converged: true,
            });
        }
        match kind {
            FixKind::Lfp => {
                if !cur.is_subset(&next) {
                    return Err(EvalError::NotMonotone(rel.to_string()));
                }
            }
            FixKind::Pfp => {
                if seen.contains(&next) {
                    if record {
                        stages.push(next);
                    }
                    return Ok(Iteration {
                        stages,
                        steps,
                        result: TupleSet::new(),
                        converged: false,
                    });
                }
            }
        }
        cur = Rc::new(next);
    }
}

/// The edge relation `{(x⃗, y⃗) | φ}` with parameters held at their values.
pub fn closure_graph<'w, E: Evaluator<'w>>(
    e: &mut E,
    from: &[String],
    to: &[String],
    body: &Formula,
    outer: &Env,
    depth: usize,
) -> Result<Graph, EvalError> {
    let r = e.relation_under(body, outer, depth)?;
    let vars: Vec<String> = from.iter().chain(to).cloned().collect();
    let k = from.len();
    let tuples = tuples_over(e, &r, &vars)?;
    Ok(Graph::from_edges(
        tuples
            .into_iter()
            .map(|t| (t[..k].to_vec(), t[k..].to_vec())),
    ))
}

fn params_of<'w, E: Evaluator<'w>>(e: &mut E, body: &Formula, binders: &[&String]) -> Vec<String> {
    e.core()
        .free(body)
        .iter()
        .filter(|v| !binders.contains(v))
        .cloned()
        .collect()
}

fn cache_key<'w, E: Evaluator<'w>>(e: &mut E, node: &Formula, outer: &Env, params: &[String]) -> (usize, Vec<FactorRef>, u64) {
    let generation = if e.core().uses_outer_relations(node) {
        e.core().generation()
    } else {
        0
    };
    let values = params.iter().map(|p| outer.get(p).unwrap()).collect();
    (ptr(node), values, generation)
}

fn fixpoint_tuples<'w, E: Evaluator<'w>>(
    e: &mut E,
    node: &Formula,
    outer: &Env,
    params: &[String],
    depth: usize,
) -> Result<Rc<TupleSet>, EvalError> {
    let Formula::Fixpoint {
        kind,
        vars,
        rel,
        body,
        ..
    } = node
    else {
        unreachable!("fixpoint node expected")
    };
    let key = cache_key(e, node, outer, params);
    if let Some(t) = e.core().fix_tuples.get(&key) {
        return Ok(t.clone());
    }
    let it = iterate(e, *kind, vars, rel, body, outer, false, depth)?;
    let t = Rc::new(it.result);
    e.core().fix_tuples.insert(key, t.clone());
    Ok(t)
}

fn graph<'w, E: Evaluator<'w>>(
    e: &mut E,
    node: &Formula,
    outer: &Env,
    params: &[String],
    depth: usize,
) -> Result<Rc<Graph>, EvalError> {
    let Formula::Closure { from, to, body, .. } = node else {
        unreachable!("closure node expected")
    };
    let key = cache_key(e, node, outer, params);
    if let Some(g) = e.core().fix_graphs.get(&key) {
        return Ok(g.clone());
    }
    let g = Rc::new(closure_graph(e, from, to, body, outer, depth)?);
    e.core().fix_graphs.insert(key, g.clone());
    Ok(g)
}

/// Every tuple of factors of length `k`.
fn all_tuples(idx: &FactorIndex, k: usize) -> Vec<Vec<FactorRef>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * idx.factor_count());
        for t in &out {
            for &f in idx.factors() {
                let mut t = t.clone();
                t.push(f);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// The relation defined by a closure or fixpoint node over its free variables
/// not in `fixed`.
pub(crate) fn node_relation<'w, E: Evaluator<'w>>(
    e: &mut E,
    node: &Formula,
    fixed: &Env,
    depth: usize,
) -> Result<Relation, EvalError> {
    let idx = e.core().idx;
    let (binders, body): (Vec<&String>, &Formula) = match node {
        Formula::Closure { from, to, body, .. } => (from.iter().chain(to).collect(), body),
        Formula::Fixpoint { vars, body, .. } => (vars.iter().collect(), body),
        _ => unreachable!("closure or fixpoint node expected"),
    };
    let params = params_of(e, body, &binders);
    let open_params: Vec<String> = params.iter().filter(|p| !fixed.contains(p)).cloned().collect();
    let mut scheme: Vec<String> = e
        .core()
        .free(node)
        .iter()
        .filter(|v| !fixed.contains(v))
        .cloned()
        .collect();
    scheme.sort();
    e.core().guard_power(open_params.len())?;
    let mut out = Relation::empty(&scheme);
    for assignment in all_tuples(idx, open_params.len()) {
        let mut local = fixed.clone();
        for (p, &v) in open_params.iter().zip(&assignment) {
            local.push(p, v);
        }
        let mut outer = Env::new();
        for p in &params {
            outer.push(p, local.get(p).unwrap());
        }
        let part = match node {
            Formula::Fixpoint { args, .. } => {
                let t = fixpoint_tuples(e, node, &outer, &params, depth)?;
                bind_tuples(idx, t.iter(), args, &local)
            }
            Formula::Closure {
                kind, src, dst, ..
            } => {
                let g = graph(e, node, &outer, &params, depth)?;
                let resolved = |v: &String| -> Option<FactorRef> {
                    if crate::syntax::is_universe(v) {
                        Some(idx.whole())
                    } else {
                        local.get(v)
                    }
                };
                let sources: Vec<Vec<FactorRef>> =
                    match src.iter().map(resolved).collect::<Option<Vec<_>>>() {
                        Some(s) => vec![s],
                        None => {
                            e.core().guard_power(src.len())?;
                            all_tuples(idx, src.len())
                        }
                    };
                let args: Vec<String> = src.iter().chain(dst).cloned().collect();
                let mut tuples = Vec::new();
                for s in sources {
                    for t in g.reach(&s, *kind == ClosureKind::Dtc) {
                        let mut row = s.clone();
                        row.extend(t);
                        tuples.push(row);
                    }
                }
                bind_tuples(idx, tuples.iter(), &args, &local)
            }
            _ => unreachable!(),
        };
        let part = if open_params.is_empty() {
            part
        } else {
            let cols = Relation::from_rows(&open_params, vec![assignment.clone()]);
            part.join(&cols)
        };
        out = out.union(&part.project(&scheme));
        e.core().record_rows(out.len())?;
    }
    Ok(out)
}

/// The stages of the fixpoint operator at the root of `node` on an indexed
/// word, with any parameters held at their values in `outer`.
pub fn stages(
    node: &Formula,
    idx: &FactorIndex,
    engine: Engine,
    config: EvalConfig,
    outer: &crate::relation::Bindings,
) -> Result<Iteration, EvalError> {
    let Formula::Fixpoint {
        kind,
        vars,
        rel,
        body,
        ..
    } = node
    else {
        panic!("stages expects a fixpoint formula");
    };
    let env = Env::from_bindings(outer);
    match engine {
        Engine::Naive => iterate(&mut NaiveEngine::new(idx, config), *kind, vars, rel, body, &env, true, 0),
        Engine::BottomUp => {
            iterate(&mut BottomUpEngine::new(idx, config), *kind, vars, rel, body, &env, true, 0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_relation;
    use crate::syntax::parse;
    use crate::word::Word;

    fn f(s: usize, l: usize) -> FactorRef {
        FactorRef::new(s, l)
    }

    #[test]
    fn reachability_in_graphs() {
        let g = Graph::from_edges([
            (vec![f(1, 1)], vec![f(2, 1)]),
            (vec![f(2, 1)], vec![f(3, 1)]),
            (vec![f(2, 1)], vec![f(1, 0)]),
        ]);
        assert_eq!(g.reach(&[f(1, 1)], false).len(), 4);
        // the second node has two successors, so a deterministic walk stops there
        assert_eq!(g.reach(&[f(1, 1)], true).len(), 2);
        assert_eq!(g.reach(&[f(3, 1)], true).len(), 1);
    }

    #[test]
    fn lfp_stages_of_balanced_words() {
        // a^n b^n as a unary least fixpoint
        let node = parse("lfp[x, R: x = \"\" | exists y: (x = \"a\" y \"b\" & R(y))](u)").unwrap();
        let Formula::Fixpoint { .. } = &node else { panic!() };
        let idx = FactorIndex::new(Word::new("aaabbb"));
        let it = stages(&node, &idx, Engine::BottomUp, EvalConfig::default(), &Default::default()).unwrap();
        assert!(it.converged);
        assert_eq!(it.result.len(), 4);
        for w in it.stages.windows(2) {
            assert!(w[0].is_subset(&w[1]));
        }
        for engine in [Engine::Naive, Engine::BottomUp] {
            let (r, _) = eval_relation(&node, &idx, engine, EvalConfig::default()).unwrap();
            assert_eq!(r, Relation::unit(true));
        }
        let idx = FactorIndex::new(Word::new("aabbb"));
        let (r, _) = eval_relation(&node, &idx, Engine::Naive, EvalConfig::default()).unwrap();
        assert_eq!(r, Relation::unit(false));
    }

    #[test]
    fn pfp_without_fixed_point_is_empty() {
        let node = parse("pfp[x, R: !R(x)](x)").unwrap();
        let idx = FactorIndex::new(Word::new("ab"));
        let it = stages(&node, &idx, Engine::Naive, EvalConfig::default(), &Default::default()).unwrap();
        assert!(!it.converged);
        assert!(it.result.is_empty());
        for engine in [Engine::Naive, Engine::BottomUp] {
            let (r, _) = eval_relation(&node, &idx, engine, EvalConfig::default()).unwrap();
            assert!(r.is_empty());
        }
    }
}
