//! Static optimization of word equations: standard graphs of patterns, tree
//! decompositions, and rewriting existentially quantified equations into
//! conjunctions of binary concatenations with small width.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::syntax::{free_vars, is_universe, width, Formula, FreshNames, Pattern, Term, WordEquation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("the pattern is empty")]
    EmptyPattern,
    #[error("formula does not have the expected shape: {0}")]
    Shape(String),
    #[error("invalid tree decomposition: {0}")]
    InvalidDecomposition(String),
}

/// An undirected graph on vertices `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![BTreeSet::new(); n + 1],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a >= 1 && a <= self.n && b >= 1 && b <= self.n, "vertex out of range");
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn neighbours(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    /// Edges as pairs `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 1..=self.n {
            for &b in &self.adj[a] {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// The standard graph of a pattern: one vertex per position, edges between
/// neighbouring positions and between consecutive occurrences of a variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandardGraph {
    pub graph: Graph,
    /// The symbol at each position (index 0 is position 1).
    pub positions: Vec<Term>,
}

pub fn standard_graph(alpha: &Pattern) -> Result<StandardGraph, PatternError> {
    let positions = alpha.positions();
    let n = positions.len();
    if n == 0 {
        return Err(PatternError::EmptyPattern);
    }
    let mut graph = Graph::new(n);
    for i in 1..n {
        graph.add_edge(i, i + 1);
    }
    let mut last: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in positions.iter().enumerate() {
        if let Term::Var(v) = t {
            if let Some(&j) = last.get(v.as_str()) {
                graph.add_edge(j, i + 1);
            }
            last.insert(v, i + 1);
        }
    }
    Ok(StandardGraph { graph, positions })
}

/// A tree decomposition: bags indexed by tree node, and the tree's edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    /// Largest bag size minus one (0 for a decomposition without vertices).
    pub fn width(&self) -> usize {
        self.bags.iter().map(BTreeSet::len).max().unwrap_or(0).saturating_sub(1)
    }

    fn tree_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Checks that the tree is a tree and that vertex coverage, edge coverage,
    /// and connectedness of every vertex's bags hold.
    pub fn validate(&self, g: &Graph) -> Result<(), PatternError> {
        let bad = |m: String| Err(PatternError::InvalidDecomposition(m));
        let m = self.bags.len();
        if m == 0 {
            return bad("no tree nodes".into());
        }
        if self.edges.len() != m - 1 {
            return bad(format!("{} nodes but {} edges", m, self.edges.len()));
        }
        let adj = self.tree_adjacency();
        if edges_reach(&adj, 0, |_| true) != m {
            return bad("the tree is not connected".into());
        }
        for bag in &self.bags {
            if let Some(&v) = bag.iter().find(|&&v| v == 0 || v > g.vertex_count()) {
                return bad(format!("bag contains unknown vertex {v}"));
            }
        }
        for v in 1..=g.vertex_count() {
            let holding: Vec<usize> = (0..m).filter(|&t| self.bags[t].contains(&v)).collect();
            let Some(&first) = holding.first() else {
                return bad(format!("vertex {v} is in no bag"));
            };
            if edges_reach(&adj, first, |t| self.bags[t].contains(&v)) != holding.len() {
                return bad(format!("the bags containing vertex {v} are not connected"));
            }
        }
        for (a, b) in g.edges() {
            if !self.bags.iter().any(|bag| bag.contains(&a) && bag.contains(&b)) {
                return bad(format!("edge {{{a}, {b}}} is in no bag"));
            }
        }
        Ok(())
    }
}

/// Number of tree nodes reachable from `start` through nodes satisfying `keep`.
fn edges_reach(adj: &[Vec<usize>], start: usize, keep: impl Fn(usize) -> bool) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(t) = stack.pop() {
        count += 1;
        for &s in &adj[t] {
            if !seen[s] && keep(s) {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    count
}

/// Result of a treewidth computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Treewidth {
    pub width: usize,
    pub decomposition: TreeDecomposition,
    /// Whether `width` is the treewidth rather than an upper bound.
    pub exact: bool,
}

/// Largest graph for which treewidth is computed exactly.
pub const EXACT_TREEWIDTH_LIMIT: usize = 12;

/// Treewidth with a decomposition of that width. Exact for graphs with at
/// most [`EXACT_TREEWIDTH_LIMIT`] vertices (dynamic programming over vertex
/// subsets); larger graphs use the min-fill elimination heuristic.
pub fn treewidth(g: &Graph) -> Treewidth {
    let n = g.vertex_count();
    if n == 0 {
        return Treewidth {
            width: 0,
            decomposition: TreeDecomposition {
                bags: vec![BTreeSet::new()],
                edges: Vec::new(),
            },
            exact: true,
        };
    }
    let (order, exact) = if n <= EXACT_TREEWIDTH_LIMIT {
        (exact_order(g), true)
    } else {
        (min_fill_order(g), false)
    };
    let decomposition = decomposition_from_order(g, &order);
    Treewidth {
        width: decomposition.width(),
        decomposition,
        exact,
    }
}

/// Vertices outside `s ∪ {v}` reachable from `v` through vertices of `s`
/// (bit `i` stands for vertex `i + 1`).
fn q_size(g: &Graph, s: u32, v: usize) -> usize {
    let mut seen: u32 = 1 << (v - 1);
    let mut stack = vec![v];
    let mut out = 0usize;
    while let Some(x) = stack.pop() {
        for &y in g.neighbours(x) {
            let bit = 1u32 << (y - 1);
            if seen & bit != 0 {
                continue;
            }
            seen |= bit;
            if s & bit != 0 {
                stack.push(y);
            } else {
                out += 1;
            }
        }
    }
    out
}

/// An elimination order of optimal width.
fn exact_order(g: &Graph) -> Vec<usize> {
    let n = g.vertex_count();
    let full: u32 = (1u32 << n) - 1;
    // best[s] = width of the best order eliminating exactly s first
    let mut best = vec![0usize; 1 << n];
    let mut choice = vec![0usize; 1 << n];
    for s in 1..=full {
        let mut b = usize::MAX;
        let mut c = 0;
        for v in 1..=n {
            let bit = 1u32 << (v - 1);
            if s & bit == 0 {
                continue;
            }
            let rest = s & !bit;
            let w = best[rest as usize].max(q_size(g, rest, v));
            if w < b {
                b = w;
                c = v;
            }
        }
        best[s as usize] = b;
        choice[s as usize] = c;
    }
    let mut order = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        let v = choice[s as usize];
        order.push(v);
        s &= !(1u32 << (v - 1));
    }
    order.reverse();
    order
}

/// Greedy elimination: fewest fill edges first, then lowest degree, then
/// lowest vertex.
fn min_fill_order(g: &Graph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut adj = g.adj.clone();
    let mut alive: BTreeSet<usize> = (1..=n).collect();
    let mut order = Vec::with_capacity(n);
    while !alive.is_empty() {
        let v = *alive
            .iter()
            .min_by_key(|&&v| {
                let nb: Vec<usize> = adj[v].iter().copied().collect();
                let mut fill = 0;
                for (i, &a) in nb.iter().enumerate() {
                    for &b in &nb[i + 1..] {
                        if !adj[a].contains(&b) {
                            fill += 1;
                        }
                    }
                }
                (fill, nb.len(), v)
            })
            .unwrap();
        eliminate(&mut adj, v);
        alive.remove(&v);
        order.push(v);
    }
    order
}

fn eliminate(adj: &mut [BTreeSet<usize>], v: usize) -> BTreeSet<usize> {
    let nb = std::mem::take(&mut adj[v]);
    for &a in &nb {
        adj[a].remove(&v);
        for &b in &nb {
            if a != b {
                adj[a].insert(b);
            }
        }
    }
    nb
}

/// The tree decomposition induced by an elimination order: one bag per vertex
/// holding it and its neighbours at elimination time, attached to the bag of
/// the first of those neighbours to be eliminated.
pub fn decomposition_from_order(g: &Graph, order: &[usize]) -> TreeDecomposition {
    let n = g.vertex_count();
    let mut adj = g.adj.clone();
    let mut pos = vec![0usize; n + 1];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut bags = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    for &v in order {
        let nb = eliminate(&mut adj, v);
        parents.push(nb.iter().map(|&u| pos[u]).min());
        let mut bag = nb;
        bag.insert(v);
        bags.push(bag);
    }
    let last = n - 1;
    let edges = parents
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != last)
        .map(|(i, p)| (i, p.unwrap_or(last)))
        .collect();
    TreeDecomposition { bags, edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiceKind {
    Leaf,
    Introduce(usize),
    Forget(usize),
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceNode {
    pub kind: NiceKind,
    pub bag: BTreeSet<usize>,
    pub children: Vec<usize>,
}

/// A rooted tree decomposition with empty root and leaf bags whose inner
/// nodes introduce one vertex, forget one vertex, or join two equal bags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceTreeDecomposition {
    pub nodes: Vec<NiceNode>,
    pub root: usize,
}

impl NiceTreeDecomposition {
    pub fn width(&self) -> usize {
        self.as_tree_decomposition().width()
    }

    pub fn as_tree_decomposition(&self) -> TreeDecomposition {
        TreeDecomposition {
            bags: self.nodes.iter().map(|n| n.bag.clone()).collect(),
            edges: self
                .nodes
                .iter()
                .enumerate()
                .flat_map(|(i, n)| n.children.iter().map(move |&c| (i, c)))
                .collect(),
        }
    }

    /// The parent of every node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                p[c] = Some(i);
            }
        }
        p
    }

    /// Checks the decomposition conditions and the typing of every node.
    pub fn validate(&self, g: &Graph) -> Result<(), PatternError> {
        let bad = |m: String| Err(PatternError::InvalidDecomposition(m));
        self.as_tree_decomposition().validate(g)?;
        if !self.nodes[self.root].bag.is_empty() {
            return bad("root bag is not empty".into());
        }
        if self.parents()[self.root].is_some() {
            return bad("root has a parent".into());
        }
        let mut forgets = vec![0usize; g.vertex_count() + 1];
        for (i, n) in self.nodes.iter().enumerate() {
            let child_bag = |k: usize| &self.nodes[n.children[k]].bag;
            let ok = match n.kind {
                NiceKind::Leaf => n.children.is_empty() && n.bag.is_empty(),
                NiceKind::Introduce(v) => {
                    n.children.len() == 1 && !child_bag(0).contains(&v) && {
                        let mut b = child_bag(0).clone();
                        b.insert(v);
                        b == n.bag
                    }
                }
                NiceKind::Forget(v) => {
                    forgets[v] += 1;
                    n.children.len() == 1 && child_bag(0).contains(&v) && {
                        let mut b = child_bag(0).clone();
                        b.remove(&v);
                        b == n.bag
                    }
                }
                NiceKind::Join => {
                    n.children.len() == 2 && *child_bag(0) == n.bag && *child_bag(1) == n.bag
                }
            };
            if !ok {
                return bad(format!("node {i} is not a valid {:?} node", n.kind));
            }
        }
        if let Some(v) = (1..=g.vertex_count()).find(|&v| forgets[v] != 1) {
            return bad(format!("vertex {v} is forgotten {} times", forgets[v]));
        }
        Ok(())
    }
}

/// Turns a tree decomposition (rooted at node 0) into a nice one of the same
/// width. Vertices are introduced in ascending and forgotten in descending
/// order; nodes with several children become chains of join nodes.
pub fn make_nice(td: &TreeDecomposition) -> Result<NiceTreeDecomposition, PatternError> {
    let n_vertices = td.bags.iter().flatten().copied().max().unwrap_or(0);
    let mut g = Graph::new(n_vertices);
    // validate the tree shape and connectedness against the vertices it mentions
    for bag in &td.bags {
        let vs: Vec<usize> = bag.iter().copied().collect();
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                g.add_edge(a, b);
            }
        }
    }
    td.validate(&g)?;
    let adj = td.tree_adjacency();
    let mut nodes: Vec<NiceNode> = Vec::new();

    fn push(nodes: &mut Vec<NiceNode>, kind: NiceKind, bag: BTreeSet<usize>, children: Vec<usize>) -> usize {
        nodes.push(NiceNode { kind, bag, children });
        nodes.len() - 1
    }

    /// Extends the chain ending at `node` (bag `from`) up to bag `to`.
    fn morph(nodes: &mut Vec<NiceNode>, mut node: usize, to: &BTreeSet<usize>) -> usize {
        let mut bag = nodes[node].bag.clone();
        let drop: Vec<usize> = bag.difference(to).copied().collect();
        for &v in drop.iter().rev() {
            bag.remove(&v);
            node = push(nodes, NiceKind::Forget(v), bag.clone(), vec![node]);
        }
        let add: Vec<usize> = to.difference(&bag).copied().collect();
        for v in add {
            bag.insert(v);
            node = push(nodes, NiceKind::Introduce(v), bag.clone(), vec![node]);
        }
        node
    }

    fn build(
        t: usize,
        parent: Option<usize>,
        td: &TreeDecomposition,
        adj: &[Vec<usize>],
        nodes: &mut Vec<NiceNode>,
    ) -> usize {
        let bag = &td.bags[t];
        let mut subs = Vec::new();
        for &c in &adj[t] {
            if Some(c) == parent {
                continue;
            }
            let s = build(c, Some(t), td, adj, nodes);
            subs.push(morph(nodes, s, bag));
        }
        if subs.is_empty() {
            let leaf = push(nodes, NiceKind::Leaf, BTreeSet::new(), Vec::new());
            return morph(nodes, leaf, bag);
        }
        let mut acc = subs[0];
        for &s in &subs[1..] {
            acc = push(nodes, NiceKind::Join, bag.clone(), vec![acc, s]);
        }
        acc
    }

    let top = build(0, None, td, &adj, &mut nodes);
    let root = morph(&mut nodes, top, &BTreeSet::new());
    Ok(NiceTreeDecomposition { nodes, root })
}

/// Splits `∃x⃗: φ` into the quantified variables and `φ`.
fn peel_exists(f: &Formula) -> (Vec<String>, &Formula) {
    let mut vars = Vec::new();
    let mut cur = f;
    while let Formula::Exists(v, b) = cur {
        vars.push(v.clone());
        cur = b;
    }
    (vars, cur)
}

/// Rewrites `∃x⃗: y = α` into an equivalent existential-positive formula of
/// width at most `2·tw(α) + 2 + |free|`.
///
/// The pattern is first split into a chain of binary concatenations
/// `z_2 = α_1 α_2`, `z_{i+1} = z_i α_{i+1}`, `y = z_{n-1} α_n`, where `z_i`
/// stands for the prefix `α_1 ⋯ α_i`. A nice tree decomposition of the
/// standard graph then dictates where each equation and quantifier goes:
/// every node is annotated with the chain variable of each position in its
/// bag and the pattern variable at that position; an equation sits at the
/// highest node annotated with all of its variables, and each variable is
/// quantified at the node that forgets the last of its positions.
pub fn decompose_equation(f: &Formula) -> Result<Formula, PatternError> {
    let (quantified, body) = peel_exists(f);
    let Formula::Eq(eq) = body else {
        return Err(PatternError::Shape(
            "expected existential quantifiers over a single word equation".into(),
        ));
    };
    let positions = eq.rhs.positions();
    let n = positions.len();
    if n <= 1 {
        return Ok(f.clone());
    }
    let mut fresh = FreshNames::avoiding(f);
    let in_rhs = eq.rhs.variables().contains(&eq.lhs.as_str());
    // a left side that also occurs on the right is split off as its own variable
    let (lhs, wrap) = if !is_universe(&eq.lhs) && in_rhs {
        (fresh.fresh("y"), Some(eq.lhs.clone()))
    } else {
        (eq.lhs.clone(), None)
    };
    let quantified: BTreeSet<String> = quantified
        .into_iter()
        .filter(|v| eq.variables().contains(&v.as_str()))
        .collect();

    let z: Vec<String> = (0..=n)
        .map(|i| {
            if (2..n).contains(&i) {
                fresh.fresh(&format!("z{i}"))
            } else {
                String::new()
            }
        })
        .collect();
    let var_at = |i: usize| -> Option<&str> {
        match &positions[i - 1] {
            Term::Var(v) if !is_universe(v) => Some(v.as_str()),
            _ => None,
        }
    };
    // the equation for position j (2..=n), with the variables it mentions
    let mut equations: Vec<(WordEquation, BTreeSet<String>)> = Vec::new();
    for j in 2..=n {
        let left = if j == n { lhs.clone() } else { z[j].clone() };
        let mut rhs = Pattern::new();
        if j == 2 {
            rhs.push(positions[0].clone());
        } else {
            rhs.push_var(&z[j - 1]);
        }
        rhs.push(positions[j - 1].clone());
        let e = WordEquation::new(&left, rhs);
        let vars: BTreeSet<String> = e
            .variables()
            .into_iter()
            .filter(|v| !is_universe(v))
            .map(String::from)
            .collect();
        equations.push((e, vars));
    }

    let sg = standard_graph(&eq.rhs)?;
    let tw = treewidth(&sg.graph);
    let nice = make_nice(&tw.decomposition)?;
    let parents = nice.parents();
    let mut depth = vec![0usize; nice.nodes.len()];
    // nodes are created children-first, so walk from the root down
    for i in (0..nice.nodes.len()).rev() {
        if let Some(p) = parents[i] {
            depth[i] = depth[p] + 1;
        }
    }
    let annotation: Vec<BTreeSet<String>> = nice
        .nodes
        .iter()
        .map(|node| {
            let mut a = BTreeSet::new();
            for &i in &node.bag {
                if i == n {
                    if !is_universe(&lhs) {
                        a.insert(lhs.clone());
                    }
                } else if i > 1 {
                    a.insert(z[i].clone());
                }
                if let Some(v) = var_at(i) {
                    a.insert(v.to_string());
                }
            }
            a
        })
        .collect();

    let mut eqs_at: Vec<Vec<WordEquation>> = vec![Vec::new(); nice.nodes.len()];
    for (e, vars) in equations {
        let home = (0..nice.nodes.len())
            .filter(|&t| vars.is_subset(&annotation[t]))
            .min_by_key(|&t| (depth[t], t))
            .expect("some bag holds both neighbouring positions");
        eqs_at[home].push(e);
    }

    // quantifiers: at the highest node forgetting any position annotated with the variable
    let mut to_quantify: BTreeSet<String> = z[2..n].iter().cloned().collect();
    to_quantify.extend(
        quantified
            .iter()
            .filter(|v| Some(*v) != wrap.as_ref())
            .cloned(),
    );
    let mut quants_at: Vec<Vec<String>> = vec![Vec::new(); nice.nodes.len()];
    for v in &to_quantify {
        let home = nice
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, node)| match node.kind {
                NiceKind::Forget(i) => {
                    (i == n && lhs == *v)
                        || (i > 1 && i < n && z[i] == *v)
                        || var_at(i) == Some(v.as_str())
                }
                _ => false,
            })
            .map(|(t, _)| t)
            .min_by_key(|&t| (depth[t], t))
            .expect("every annotated variable has a forget node");
        quants_at[home].push(v.clone());
    }

    fn assemble(
        t: usize,
        nice: &NiceTreeDecomposition,
        eqs_at: &[Vec<WordEquation>],
        quants_at: &[Vec<String>],
    ) -> Option<Formula> {
        let mut parts: Vec<Formula> = eqs_at[t].iter().cloned().map(Formula::Eq).collect();
        for &c in &nice.nodes[t].children {
            parts.extend(assemble(c, nice, eqs_at, quants_at));
        }
        if parts.is_empty() {
            return None;
        }
        Some(Formula::exists_all(&quants_at[t], Formula::and_all(parts)))
    }

    let mut psi = assemble(nice.root, &nice, &eqs_at, &quants_at).expect("at least one equation");
    if let Some(y) = wrap {
        psi = Formula::exists(&lhs, Formula::and(psi, Formula::eq(&y, Pattern::var(&lhs))));
        if quantified.contains(&y) {
            psi = Formula::exists(&y, psi);
        }
    }
    Ok(psi)
}

/// The width bound `2·tw(α) + 2 + |free(y = α) − x⃗|` for `∃x⃗: y = α`.
pub fn decomposition_bound(f: &Formula) -> Result<usize, PatternError> {
    let (_, body) = peel_exists(f);
    let Formula::Eq(eq) = body else {
        return Err(PatternError::Shape("expected a word equation".into()));
    };
    let sg = standard_graph(&eq.rhs)?;
    let tw = treewidth(&sg.graph).width;
    Ok(2 * tw + 2 + free_vars(f).len())
}

/// Rewrites `∃x: y = x^(2^k)` into the doubling chain
/// `∃x₁: (y = x₁x₁ ∧ ∃x₂: (x₁ = x₂x₂ ∧ ∃x₁: (x₂ = x₁x₁ ∧ …)))`, which reuses two
/// variable names alternately and so has constant width.
pub fn rewrite_power(f: &Formula) -> Result<Formula, PatternError> {
    let shape = || PatternError::Shape("expected `exists x: y = x x ... x` with 2^k copies".into());
    let Formula::Exists(x, body) = f else {
        return Err(shape());
    };
    let Formula::Eq(eq) = &**body else {
        return Err(shape());
    };
    let items = eq.rhs.items();
    let count = items.len();
    if count == 0 || !count.is_power_of_two() || eq.lhs == *x {
        return Err(shape());
    }
    if !items.iter().all(|t| matches!(t, Term::Var(v) if v == x)) {
        return Err(shape());
    }
    let k = count.trailing_zeros() as usize;
    if k == 0 {
        return Ok(f.clone());
    }
    let mut fresh = FreshNames::avoiding(f);
    let names = [fresh.fresh("x"), fresh.fresh("x")];
    let name = |i: usize| names[(i - 1) % 2].clone();
    // innermost first: level k is `x_{k-1} = x_k x_k` (with x_0 = y)
    let mut acc: Option<Formula> = None;
    for i in (1..=k).rev() {
        let left = if i == 1 { eq.lhs.clone() } else { name(i - 1) };
        let step = Formula::eq(&left, Pattern::vars(&[name(i), name(i)]));
        let inner = match acc.take() {
            None => step,
            Some(rest) => Formula::and(step, rest),
        };
        acc = Some(Formula::exists(&name(i), inner));
    }
    Ok(acc.unwrap())
}

/// Rewrites every subformula of the shape `∃x⃗: y = α` for which
/// [`rewrite_power`] or [`decompose_equation`] gives a cheaper formula, and
/// leaves everything else unchanged. Cost is the width, then the length of the
/// longest equation. Returns the new formula and the number of
/// subformulas replaced.
pub fn optimize(f: &Formula) -> (Formula, usize) {
    let mut count = 0;
    let out = optimize_rec(f, &mut count);
    (out, count)
}

fn cost(f: &Formula) -> (usize, usize) {
    fn longest(f: &Formula) -> usize {
        match f {
            Formula::Eq(eq) => eq.rhs.positions().len(),
            _ => f.children().into_iter().map(longest).max().unwrap_or(0),
        }
    }
    (width(f), longest(f))
}

fn optimize_rec(f: &Formula, count: &mut usize) -> Formula {
    if let (_, Formula::Eq(_)) = peel_exists(f) {
        let before = cost(f);
        let best = [rewrite_power(f), decompose_equation(f)]
            .into_iter()
            .flatten()
            .map(|g| (cost(&g), g))
            .min_by_key(|(c, _)| *c);
        if let Some((c, g)) = best {
            if c < before {
                *count += 1;
                return g;
            }
        }
    }
    let rec = |g: &Formula, count: &mut usize| Box::new(optimize_rec(g, count));
    match f {
        Formula::Eq(_) | Formula::Constraint { .. } | Formula::Rel { .. } => f.clone(),
        Formula::And(a, b) => Formula::And(rec(a, count), rec(b, count)),
        Formula::Or(a, b) => Formula::Or(rec(a, count), rec(b, count)),
        Formula::Not(a) => Formula::Not(rec(a, count)),
        Formula::Exists(v, a) => Formula::Exists(v.clone(), rec(a, count)),
        Formula::Forall(v, a) => Formula::Forall(v.clone(), rec(a, count)),
        Formula::Closure {
            kind,
            from,
            to,
            body,
            src,
            dst,
        } => Formula::Closure {
            kind: *kind,
            from: from.clone(),
            to: to.clone(),
            body: rec(body, count),
            src: src.clone(),
            dst: dst.clone(),
        },
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
            body: rec(body, count),
            args: args.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, width};

    fn pat(vars: &[&str]) -> Pattern {
        Pattern::vars(vars)
    }

    /// Treewidth by trying every elimination order.
    fn brute_treewidth(g: &Graph) -> usize {
        fn perms(v: Vec<usize>) -> Vec<Vec<usize>> {
            if v.len() <= 1 {
                return vec![v];
            }
            let mut out = Vec::new();
            for i in 0..v.len() {
                let mut rest = v.clone();
                let x = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        perms((1..=g.vertex_count()).collect())
            .into_iter()
            .map(|o| decomposition_from_order(g, &o).width())
            .min()
            .unwrap()
    }

    #[test]
    fn standard_graph_of_xyxy() {
        let sg = standard_graph(&pat(&["x", "y", "x", "y"])).unwrap();
        assert_eq!(sg.graph.edges(), vec![(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(treewidth(&sg.graph).width, 2);
        assert_eq!(brute_treewidth(&sg.graph), 2);
    }

    #[test]
    fn small_treewidths() {
        let path = Graph::from_edges(6, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)]);
        assert_eq!(treewidth(&path).width, 1);
        let cycle = Graph::from_edges(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]);
        assert_eq!(treewidth(&cycle).width, 2);
        let k4 = Graph::from_edges(4, &[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(treewidth(&k4).width, 3);
        let single = standard_graph(&Pattern::lit("a")).unwrap();
        assert_eq!(treewidth(&single.graph).width, 0);
        assert_eq!(standard_graph(&Pattern::new()), Err(PatternError::EmptyPattern));
    }

    #[test]
    fn single_bag_nice_chain() {
        let td = TreeDecomposition {
            bags: vec![BTreeSet::from([1, 2])],
            edges: vec![],
        };
        let nice = make_nice(&td).unwrap();
        let mut kinds = Vec::new();
        let mut cur = Some(nice.root);
        while let Some(c) = cur {
            kinds.push(nice.nodes[c].kind);
            cur = nice.nodes[c].children.first().copied();
        }
        kinds.reverse();
        assert_eq!(
            kinds,
            vec![
                NiceKind::Leaf,
                NiceKind::Introduce(1),
                NiceKind::Introduce(2),
                NiceKind::Forget(2),
                NiceKind::Forget(1),
            ]
        );
        nice.validate(&Graph::from_edges(2, &[(1, 2)])).unwrap();
    }

    #[test]
    fn doubled_pattern_decomposes_to_small_width() {
        for n in 1..=8 {
            let vars: Vec<String> = (1..=n).flat_map(|i| [format!("x{i}"), format!("x{i}")]).collect();
            let f = Formula::exists_all(
                &(1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>(),
                Formula::eq("u", Pattern::vars(&vars)),
            );
            let sg = standard_graph(&Pattern::vars(&vars)).unwrap();
            assert_eq!(treewidth(&sg.graph).width, 1);
            let psi = decompose_equation(&f).unwrap();
            assert!(width(&psi) <= 4, "width {} for n = {n}", width(&psi));
        }
    }

    #[test]
    fn power_rewrite_shapes() {
        let f = parse("exists x: y = x x x x").unwrap();
        let g = rewrite_power(&f).unwrap();
        assert!(width(&g) <= 3);
        assert_eq!(g.all_vars().len(), 3);
        let f0 = parse("exists x: y = x").unwrap();
        assert_eq!(rewrite_power(&f0).unwrap(), f0);
        assert!(rewrite_power(&parse("exists x: y = x x x").unwrap()).is_err());
    }
}
