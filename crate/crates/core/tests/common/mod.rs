//! Shared corpus and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use fc_core::eval::{eval_relation, Engine, EvalConfig};
use fc_core::regexlang::{star_free_to_fc, StarFree};
use fc_core::relation::Relation;
use fc_core::spanner::{RegexFormula, Span, SpanTuple, SpannerExpr};
use fc_core::{parse, FactorIndex, Formula, Word};

pub struct Case {
    pub name: &'static str,
    pub text: String,
}

impl Case {
    pub fn formula(&self) -> Formula {
        parse(&self.text).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }
}

fn case(name: &'static str, text: &str) -> Case {
    Case {
        name,
        text: text.to_string(),
    }
}

pub const EQUAL_LENGTH_BODY: &str = r#"(x = "" & y = "") | exists xh, yh: (
    (x = "a" xh & y = "a" yh & R(xh, yh)) | (x = "a" xh & y = "b" yh & R(xh, yh))
  | (x = "b" xh & y = "a" yh & R(xh, yh)) | (x = "b" xh & y = "b" yh & R(xh, yh)))"#;

/// The a^n b^n sentence built on the equal-length fixpoint, with `op` either
/// `lfp` or `pfp`.
pub fn an_bn(op: &str) -> String {
    format!(
        "exists x, y: (u = x y & x in /a*/ & y in /b*/ & {op}[x, y, R : {EQUAL_LENGTH_BODY}](x, y))"
    )
}

pub const PALINDROME: &str = r#"exists x, y: (u = x
    & dtc[x; y : x = "a" y "a" | x = "b" y "b"](x; y)
    & (y = "" | y = "a" | y = "b"))"#;

pub const REACH: &str =
    r##"tc[x; y : exists z: (z = "$" x "#" y "$" & x in /(0|1)+/ & y in /(0|1)+/)](x; y)"##;

fn any() -> StarFree {
    StarFree::complement(StarFree::Empty)
}

fn letter(c: char) -> StarFree {
    StarFree::Letter(c)
}

/// Star-free expressions used both in the corpus and against the direct
/// membership oracle.
pub fn star_free_cases() -> Vec<(&'static str, StarFree)> {
    vec![
        ("not_ab", StarFree::complement(StarFree::concat(letter('a'), letter('b')))),
        (
            "contains_aa",
            StarFree::concat(any(), StarFree::concat(letter('a'), StarFree::concat(letter('a'), any()))),
        ),
        (
            "a_or_no_b",
            StarFree::union(
                letter('a'),
                StarFree::complement(StarFree::concat(any(), StarFree::concat(letter('b'), any()))),
            ),
        ),
        ("empty", StarFree::Empty),
    ]
}

pub fn star_free_member(e: &StarFree, w: &[char]) -> bool {
    match e {
        StarFree::Empty => false,
        StarFree::Letter(c) => w == [*c],
        StarFree::Concat(a, b) => (0..=w.len()).any(|i| star_free_member(a, &w[..i]) && star_free_member(b, &w[i..])),
        StarFree::Union(a, b) => star_free_member(a, w) || star_free_member(b, w),
        StarFree::Complement(a) => !star_free_member(a, w),
    }
}

/// The regression corpus: at least 30 formulas, most of them open.
pub fn corpus() -> Vec<Case> {
    let mut cases = vec![
        case(
            "two_occurrences",
            "exists p1, p2, s1, s2: (u = p1 x s1 & u = p2 x s2 & !(p1 = p2))",
        ),
        case("between_papaya_banana", r#"exists x: x = "papaya" y "banana""#),
        case("between_ab_ba", r#"exists x: x = "ab" y "ba""#),
        case("papaya_or_banana", r#"exists x: (x = "papaya" | x = "banana")"#),
        case("aba_or_bb", r#"exists x: (x = "aba" | x = "bb")"#),
        case(
            "occurs_once",
            "exists p, s: (u = p x s & !(exists ph, sh: (u = ph x sh & !(ph = p))))",
        ),
        case("prefix", "exists z: y = x z"),
        case("proper_prefix", "(exists z: y = x z) & !(x = y)"),
        case("power4", "exists x: y = x x x x"),
        case("power8", "exists x: y = x x x x x x x x"),
        case("power4_chain", "exists x1: (y = x1 x1 & exists x2: x1 = x2 x2)"),
        case("a_bstar_a", r#"exists x, y, z: (u = x "a" z "a" y & z in /b*/)"#),
        case("equal_length", &format!("lfp[x, y, R : {EQUAL_LENGTH_BODY}](s, t)")),
        case("an_bn_lfp", &an_bn("lfp")),
        case("an_bn_pfp", &an_bn("pfp")),
        case("palindrome", PALINDROME),
        case("reach", REACH),
        case(
            "span_banana",
            r#"exists y: (u = xP xC y & (xC = "banana" | xC = "papaya"))"#,
        ),
        case("span_ab", r#"exists y: (u = xP xC y & (xC = "ab" | xC = "ba"))"#),
        case("square_with_a", r#"u = x x & exists y: x = "a" y"#),
        case("square", "u = x x"),
        case("square_sentence", "exists x: u = x x"),
        case("no_bb", r#"forall x: !(x = "bb")"#),
        case("suffix", "exists z: u = z x"),
        case("commute", "exists z: (z = x y & z = y x)"),
        case("cube_free", r#"!(exists x, p, s: (u = p x x x s & !(x = "")))"#),
        case("append_a", r#"tc[x; y : y = x "a"](s; t)"#),
        case("strip_a", r#"dtc[x; y : x = "a" y](s; t)"#),
        case("a_then_b", "x in /a*b/"),
        case(
            "a_followed_by_b",
            r#"forall p: (!(exists s: u = p "a" s) | exists s: u = p "ab" s)"#,
        ),
        case("padded_disjunction", r#"x = "a" | y = "b""#),
        case("not_a_square", "!(exists z: x = z z)"),
        case("square_of_ab", "exists x: (u = x x & x in /(ab)*/)"),
        case("universal_prefix", "forall y: (!(exists z: x = y z) | exists z: u = y z)"),
    ];
    for (name, e) in star_free_cases() {
        cases.push(Case {
            name,
            text: star_free_to_fc(&e).to_string(),
        });
    }
    cases
}

pub fn values(rel: &Relation, idx: &FactorIndex) -> BTreeSet<Vec<String>> {
    rel.value_rows(idx).into_iter().collect()
}

pub fn eval_values(f: &Formula, w: &Word, engine: Engine) -> BTreeSet<Vec<String>> {
    let idx = FactorIndex::new(w.clone());
    let (rel, _) = eval_relation(f, &idx, engine, EvalConfig::default())
        .unwrap_or_else(|e| panic!("{f} on {w:?}: {e}"));
    values(&rel, &idx)
}

pub fn holds(f: &Formula, w: &Word, engine: Engine) -> bool {
    !eval_values(f, w, engine).is_empty()
}

pub fn text(w: &Word) -> String {
    w.symbols().iter().collect()
}

pub fn is_palindrome(w: &[char]) -> bool {
    w.iter().eq(w.iter().rev())
}

/// Vertex names `0`, `1`, `00`, `01`, `10`, ... and the encoding of a graph as
/// `$v$` blocks for every vertex followed by `$v#v'$` blocks for every edge.
pub fn encode_graph(n: usize, edges: &[(usize, usize)]) -> (Word, Vec<String>) {
    let names: Vec<String> = (0..n)
        .map(|i| {
            let (len, off) = if i < 2 { (1, i) } else { (2, i - 2) };
            format!("{off:0len$b}")
        })
        .collect();
    let mut s = String::new();
    for v in &names {
        s.push_str(&format!("${v}$"));
    }
    for &(a, b) in edges {
        s.push_str(&format!("${}#{}$", names[a], names[b]));
    }
    (Word::new(&s), names)
}

/// Reflexive-transitive reachability by breadth-first search.
pub fn reachable(n: usize, edges: &[(usize, usize)], from: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &(a, b) in edges {
            if a == v && b < n && seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    seen
}

/// Whether some assignment of the pattern's variables (`Ok`) spells `w`, with
/// terminals (`Err`) matched literally. Backtracking search.
pub fn pattern_matches(pattern: &[Result<String, char>], w: &[char]) -> bool {
    fn go(p: &[Result<String, char>], w: &[char], env: &mut BTreeMap<String, Vec<char>>) -> bool {
        let Some((head, rest)) = p.split_first() else {
            return w.is_empty();
        };
        match head {
            Err(c) => w.first() == Some(c) && go(rest, &w[1..], env),
            Ok(v) => {
                if let Some(val) = env.get(v).cloned() {
                    return w.starts_with(&val) && go(rest, &w[val.len()..], env);
                }
                for i in 0..=w.len() {
                    env.insert(v.clone(), w[..i].to_vec());
                    if go(rest, &w[i..], env) {
                        env.remove(v);
                        return true;
                    }
                }
                env.remove(v);
                false
            }
        }
    }
    go(pattern, w, &mut BTreeMap::new())
}

/// Pattern items from text such as `x1 x1 "ab" x2`.
pub fn pattern_items(text: &str) -> Vec<Result<String, char>> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if let Some(lit) = tok.strip_prefix('"') {
            out.extend(lit.trim_end_matches('"').chars().map(Err));
        } else {
            out.push(Ok(tok.to_string()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// brute-force spanner semantics

fn rf_ends(a: &RegexFormula, w: &[char], i: usize) -> Vec<(usize, SpanTuple)> {
    match a {
        RegexFormula::Empty => vec![],
        RegexFormula::Eps => vec![(i, SpanTuple::new())],
        RegexFormula::Letter(c) => {
            if w.get(i) == Some(c) {
                vec![(i + 1, SpanTuple::new())]
            } else {
                vec![]
            }
        }
        RegexFormula::Sigma => {
            if i < w.len() {
                vec![(i + 1, SpanTuple::new())]
            } else {
                vec![]
            }
        }
        RegexFormula::Concat(l, r) => {
            let mut out = Vec::new();
            for (j, t1) in rf_ends(l, w, i) {
                for (k, t2) in rf_ends(r, w, j) {
                    let mut t = t1.clone();
                    t.extend(t2);
                    out.push((k, t));
                }
            }
            out
        }
        RegexFormula::Union(l, r) => {
            let mut out = rf_ends(l, w, i);
            out.extend(rf_ends(r, w, i));
            out
        }
        RegexFormula::Star(b) => {
            let mut seen = BTreeSet::from([i]);
            let mut queue = vec![i];
            while let Some(j) = queue.pop() {
                for (k, _) in rf_ends(b, w, j) {
                    if seen.insert(k) {
                        queue.push(k);
                    }
                }
            }
            seen.into_iter().map(|j| (j, SpanTuple::new())).collect()
        }
        RegexFormula::Bind(x, b) => rf_ends(b, w, i)
            .into_iter()
            .map(|(j, mut t)| {
                t.insert(x.clone(), Span::new(i + 1, j + 1));
                (j, t)
            })
            .collect(),
    }
}

/// Span tuples of a regex formula, by enumerating every parse.
pub fn capture_matches(a: &RegexFormula, w: &Word) -> BTreeSet<SpanTuple> {
    let s = w.symbols();
    rf_ends(a, s, 0)
        .into_iter()
        .filter(|(j, _)| *j == s.len())
        .map(|(_, t)| t)
        .collect()
}

/// The spanner algebra over explicit tuple sets.
pub fn spanner_oracle(e: &SpannerExpr, w: &Word) -> BTreeSet<SpanTuple> {
    match e {
        SpannerExpr::Rgx(a) => capture_matches(a, w),
        SpannerExpr::Union(a, b) => {
            let mut out = spanner_oracle(a, w);
            out.extend(spanner_oracle(b, w));
            out
        }
        SpannerExpr::Join(a, b) => {
            let (l, r) = (spanner_oracle(a, w), spanner_oracle(b, w));
            let mut out = BTreeSet::new();
            for t1 in &l {
                for t2 in &r {
                    if t1.iter().all(|(k, v)| t2.get(k).map_or(true, |v2| v2 == v)) {
                        let mut t = t1.clone();
                        t.extend(t2.clone());
                        out.insert(t);
                    }
                }
            }
            out
        }
        SpannerExpr::Project(vars, a) => spanner_oracle(a, w)
            .into_iter()
            .map(|t| t.into_iter().filter(|(k, _)| vars.contains(k)).collect())
            .collect(),
        SpannerExpr::Diff(a, b) => {
            let r = spanner_oracle(b, w);
            spanner_oracle(a, w).into_iter().filter(|t| !r.contains(t)).collect()
        }
        SpannerExpr::EqSelect(x, y, a) => spanner_oracle(a, w)
            .into_iter()
            .filter(|t| t[x].text(w) == t[y].text(w))
            .collect(),
    }
}
